use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::GridField;

/// 17 significant digits: enough for an exact round trip of any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

pub fn field_to_csv(u: &GridField) -> String {
    let mut s = format!(
        "# n={} m={} lo={} hi={}\n",
        u.n,
        join(u.m.iter().map(|m| m.to_string())),
        join(u.lo.iter().map(|&v| fmt_f64(v))),
        join(u.hi.iter().map(|&v| fmt_f64(v)))
    );
    for node in 0..u.len() {
        let idx = u.multi_index(node);
        let x = u.coord(node);
        let row = join(idx.iter().map(|i| i.to_string()).chain(x.iter().map(|&v| fmt_f64(v))).chain([fmt_f64(u.values[node])]));
        writeln!(s, "{row}").expect("string write");
    }
    s
}

fn bad(line: usize, what: impl Into<String>) -> Error {
    Error::FieldFormat(format!("line {line}: {}", what.into()))
}

fn header_value<'a>(parts: &[&'a str], key: &str) -> Result<&'a str> {
    let prefix = format!("{key}=");
    parts.iter().find_map(|p| p.strip_prefix(prefix.as_str())).ok_or_else(|| bad(1, format!("header lacks `{key}=`")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',').map(|v| v.trim().parse::<T>().map_err(|_| bad(1, format!("bad {what} entry `{v}`")))).collect()
}

pub fn field_from_csv(text: &str) -> Result<GridField> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let body = header.strip_prefix('#').ok_or_else(|| bad(1, "missing `#` header"))?;
    let parts: Vec<&str> = body.split_whitespace().collect();
    let n: usize = header_value(&parts, "n")?.parse().map_err(|_| bad(1, "bad n"))?;
    let m: Vec<usize> = parse_list(header_value(&parts, "m")?, "m")?;
    let lo: Vec<f64> = parse_list(header_value(&parts, "lo")?, "lo")?;
    let hi: Vec<f64> = parse_list(header_value(&parts, "hi")?, "hi")?;
    if n == 0 || m.len() != n || lo.len() != n || hi.len() != n {
        return Err(bad(1, format!("metadata lengths disagree with n = {n}")));
    }
    let total: usize = m.iter().product();
    let template = GridField::new(lo.clone(), hi.clone(), m.clone(), vec![0.0; total]).map_err(|e| bad(1, e.to_string()))?;
    let mut values = Vec::with_capacity(total);
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 * n + 1 {
            return Err(bad(lineno, format!("expected {} columns, got {}", 2 * n + 1, cols.len())));
        }
        let idx: Vec<usize> = cols[..n]
            .iter()
            .map(|c| c.parse().map_err(|_| bad(lineno, format!("bad index `{c}`"))))
            .collect::<Result<_>>()?;
        for c in &cols[n..2 * n] {
            c.parse::<f64>().map_err(|_| bad(lineno, format!("bad coordinate `{c}`")))?;
        }
        let node = values.len();
        if node >= total {
            return Err(bad(lineno, format!("more rows than the {total} nodes of the grid")));
        }
        if idx != template.multi_index(node) {
            return Err(bad(lineno, format!("node order: expected index {:?}, got {idx:?}", template.multi_index(node))));
        }
        values.push(cols[2 * n].parse::<f64>().map_err(|_| bad(lineno, format!("bad value `{}`", cols[2 * n])))?);
    }
    if values.len() != total {
        return Err(Error::FieldFormat(format!("node count: expected {total}, got {}", values.len())));
    }
    GridField::new(lo, hi, m, values)
}

pub fn emit_field(u: &GridField, path: &Path) -> Result<()> {
    std::fs::write(path, field_to_csv(u))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<GridField> {
    field_from_csv(&std::fs::read_to_string(path)?)
}
