use nalgebra::DMatrix;

use super::coefficient::AKind;
use super::source::BKind;
use super::{
    param_num, param_text, BoxDomain, CoefficientA, ManufacturedField, ParamValue, Params, ProblemSpec, ScalarField,
    ScalarFn, SourceB,
};
use crate::error::{Error, Result};
use crate::symfun::{binomial, matrix_cone_classify, matrix_sk, ConeLabel, SymMat};

/// Catalog lookup result: a coefficient, a source, or both.
#[derive(Debug, Clone)]
pub struct Components {
    pub a: Option<CoefficientA>,
    pub b: Option<SourceB>,
}

fn invalid(name: &str, reason: &str) -> Error {
    Error::InvalidParameter { name: name.to_string(), reason: reason.to_string() }
}

fn positive(params: &Params, key: &str, default: f64) -> Result<f64> {
    let v = param_num(params, key, default)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, &format!("must be > 0, got {v}")))
    }
}

/// Instantiate a named coefficient or source for dimension `n`.
///
/// Coefficients: `zero_A`, `conformal_A_as_printed`, `conformal_A_signflip`,
/// `skew_projector_A` (`s >= 0`), `x_diag_A` (`c`), `u_diag_A` (`g` in
/// {`exp`, `linear`}, `c`). Sources: `const_B` (`c > 0`), `power_B`
/// (`b0 > 0`, `t`), `exp_u_B` (`c > 0`). `ot_quadratic_cost` (`f0`, `g0`,
/// `beta`) yields both.
pub fn catalog_instantiate(name: &str, params: &Params, n: usize) -> Result<Components> {
    let a = |kind| Components { a: Some(CoefficientA::new(name, params.clone(), kind)), b: None };
    let b = |kind| Components { a: None, b: Some(SourceB::new(name, params.clone(), kind)) };
    Ok(match name {
        "zero_A" => a(AKind::Zero),
        "conformal_A_as_printed" => a(AKind::ConformalPrinted),
        "conformal_A_signflip" => a(AKind::ConformalSignflip),
        "skew_projector_A" => {
            let s = param_num(params, "s", 1.0)?;
            if s < 0.0 {
                return Err(invalid("s", &format!("must be >= 0, got {s}")));
            }
            a(AKind::SkewProjector { s })
        }
        "x_diag_A" => a(AKind::XDiag { c: param_num(params, "c", 1.0)? }),
        "u_diag_A" => {
            let c = param_num(params, "c", 1.0)?;
            let g = match param_text(params, "g", "exp")? {
                "exp" => ScalarFn::Exp { c },
                "linear" => ScalarFn::Linear { c },
                other => return Err(invalid("g", &format!("unknown function `{other}`, expected exp or linear"))),
            };
            a(AKind::UDiag { g })
        }
        "const_B" => b(BKind::Const { c: positive(params, "c", 1.0)? }),
        "power_B" => b(BKind::Power { b0: positive(params, "b0", 1.0)?, t: param_num(params, "t", 1.0)? }),
        "exp_u_B" => b(BKind::ExpU { c: positive(params, "c", 1.0)? }),
        "ot_quadratic_cost" => {
            let f0 = positive(params, "f0", 1.0)?;
            let g0 = positive(params, "g0", 1.0)?;
            let beta = param_num(params, "beta", 1.0)?;
            if beta < 0.0 {
                return Err(invalid("beta", "must be >= 0"));
            }
            // c(x, y) = |x - y|^2 / 2: D_xx c = I, Y(x, p) = x - p, |det D_xy c| = 1,
            // target density g0 exp(-beta |y|^2 / 2), source density f0.
            Components {
                a: Some(CoefficientA::new(name, params.clone(), AKind::Constant { m: DMatrix::identity(n, n) })),
                b: Some(SourceB::new(name, params.clone(), BKind::OtQuadratic { scale: f0 / g0, beta })),
            }
        }
        other => return Err(Error::UnknownCatalog(other.to_string())),
    })
}

/// `B(x) = S_k[D^2 u*(x) - A(x, u*(x), Du*(x))]`, evaluated lazily. Points
/// where the augmented Hessian of `u*` leaves the open cone are reported
/// with the offending `x`.
pub fn manufactured_b(k: usize, a: &CoefficientA, u_star: &ManufacturedField) -> SourceB {
    let a = a.clone();
    let u = u_star.clone();
    let id = format!("manufactured({})", u_star.id);
    SourceB::pointwise(&id, move |x| {
        let z = (u.value)(x);
        let p = (u.grad)(x);
        let w = SymMat::symmetrized((u.hess)(x) - a.eval_raw(x, z, &p));
        let cone = matrix_cone_classify(&w, k, 0.0)?;
        if cone.label != ConeLabel::Interior {
            let (j, margin) = cone.worst();
            return Err(Error::InadmissibleAt { x: x.to_vec(), j, margin });
        }
        matrix_sk(&w, k)
    })
}

/// Boundary data catalog: `half_norm_sq` (`mu |x|^2 / 2`), `exp_half_norm_sq`,
/// `zero`.
pub fn boundary_catalog(name: &str, params: &Params) -> Result<ScalarField> {
    Ok(match name {
        "half_norm_sq" => {
            let mu = param_num(params, "mu", 1.0)?;
            ScalarField::new(format!("half_norm_sq({mu})"), move |x| 0.5 * mu * x.iter().map(|v| v * v).sum::<f64>())
        }
        "exp_half_norm_sq" => ManufacturedField::exp_half_norm_sq().as_scalar_field(),
        "zero" => ScalarField::new("zero", |_| 0.0),
        other => return Err(Error::UnknownCatalog(other.to_string())),
    })
}

/// Named whole-problem instances.
pub const PRESET_NAMES: &[&str] = &[
    "zero_A_const_B",
    "manufactured_exp",
    "skew_projector_const_B",
    "conformal_printed_const_B",
    "conformal_signflip_const_B",
    "power_B_zero_A",
    "u_dependent",
    "ot_quadratic",
];

fn half_norm_sq(mu: f64) -> ScalarField {
    ScalarField::new(format!("half_norm_sq({mu})"), move |x| 0.5 * mu * x.iter().map(|v| v * v).sum::<f64>())
}

fn sub_params(params: &Params, keys: &[(&str, &str)]) -> Params {
    keys.iter()
        .filter_map(|(from, to)| params.get(*from).map(|v| (to.to_string(), v.clone())))
        .collect()
}

/// Build a preset problem on `domain` (default `[-1, 1]^n`).
///
/// * `zero_A_const_B` (`mu`): `A = 0`, `B = C(n,k) mu^k`, `phi = mu|x|^2/2`;
///   exact solution `phi`.
/// * `manufactured_exp`: `A = 0`, `u* = exp(|x|^2/2)`, `B` manufactured.
/// * `skew_projector_const_B` (`s`, `c`, `mu_sub`): skew projector `A`,
///   constant `B`, `phi = |x|^2/2`, with subsolution `mu_sub |x|^2/2 + c0`
///   lying below `phi` on the boundary.
/// * `conformal_printed_const_B`, `conformal_signflip_const_B`,
///   `power_B_zero_A` (`b0`, `t`): structure-check instances.
/// * `u_dependent` (`c_a`, `c_b`): `A = c_a z I`, `B = c_b e^z`.
/// * `ot_quadratic` (`f0`, `g0`, `beta`): quadratic cost, `phi = |x|^2`.
pub fn problem_preset(name: &str, n: usize, k: usize, domain: Option<BoxDomain>, params: &Params) -> Result<ProblemSpec> {
    let domain = domain.unwrap_or_else(|| BoxDomain::cube(n, -1.0, 1.0));
    if domain.dim() != n {
        return Err(Error::Domain(format!("box has dimension {}, expected {n}", domain.dim())));
    }
    let none = Params::new();
    let get_a = |name: &str, p: &Params| -> Result<CoefficientA> {
        catalog_instantiate(name, p, n)?.a.ok_or_else(|| Error::UnknownCatalog(name.into()))
    };
    let get_b = |name: &str, p: &Params| -> Result<SourceB> {
        catalog_instantiate(name, p, n)?.b.ok_or_else(|| Error::UnknownCatalog(name.into()))
    };
    let unit = half_norm_sq(1.0);
    match name {
        "zero_A_const_B" => {
            let mu = positive(params, "mu", 1.0)?;
            let c = binomial(n, k) * mu.powi(k as i32);
            let b = get_b("const_B", &[("c".to_string(), ParamValue::Num(c))].into_iter().collect())?;
            let phi = half_norm_sq(mu);
            Ok(ProblemSpec::new(name, k, domain, get_a("zero_A", &none)?, b, phi.clone())?.with_exact(phi))
        }
        "manufactured_exp" => {
            let a = get_a("zero_A", &none)?;
            let u = ManufacturedField::exp_half_norm_sq();
            let b = manufactured_b(k, &a, &u);
            let phi = u.as_scalar_field();
            Ok(ProblemSpec::new(name, k, domain, a, b, phi.clone())?.with_exact(phi))
        }
        "skew_projector_const_B" => {
            let a = get_a("skew_projector_A", &sub_params(params, &[("s", "s")]).into_iter().chain(
                params.get("s").is_none().then(|| ("s".to_string(), ParamValue::Num(0.1))),
            ).collect())?;
            let b = get_b("const_B", &sub_params(params, &[("c", "c")]))?;
            let mu_sub = positive(params, "mu_sub", 1.5)?;
            let c0 = -0.5 * (mu_sub - 1.0).max(0.0) * domain.max_norm_sq();
            let sub = ScalarField::new(format!("subsolution({mu_sub})"), move |x| {
                0.5 * mu_sub * x.iter().map(|v| v * v).sum::<f64>() + c0
            });
            Ok(ProblemSpec::new(name, k, domain, a, b, unit)?.with_subsolution(sub))
        }
        "conformal_printed_const_B" | "conformal_signflip_const_B" => {
            let a_name = if name == "conformal_printed_const_B" { "conformal_A_as_printed" } else { "conformal_A_signflip" };
            let b = get_b("const_B", &sub_params(params, &[("c", "c")]))?;
            ProblemSpec::new(name, k, domain, get_a(a_name, &none)?, b, unit)
        }
        "power_B_zero_A" => {
            let b = get_b("power_B", &sub_params(params, &[("b0", "b0"), ("t", "t")]))?;
            ProblemSpec::new(name, k, domain, get_a("zero_A", &none)?, b, unit)
        }
        "u_dependent" => {
            let c_a = param_num(params, "c_a", 0.1)?;
            let mut pa: Params = [("c".to_string(), ParamValue::Num(c_a))].into_iter().collect();
            pa.insert("g".into(), ParamValue::Text("linear".into()));
            let pb: Params = [("c".to_string(), ParamValue::Num(param_num(params, "c_b", 1.0)?))].into_iter().collect();
            ProblemSpec::new(name, k, domain, get_a("u_diag_A", &pa)?, get_b("exp_u_B", &pb)?, unit)
        }
        "ot_quadratic" => {
            let c = catalog_instantiate("ot_quadratic_cost", params, n)?;
            let phi = half_norm_sq(2.0);
            ProblemSpec::new(name, k, domain, c.a.expect("pair"), c.b.expect("pair"), phi)
        }
        other => Err(Error::UnknownCatalog(other.to_string())),
    }
}
