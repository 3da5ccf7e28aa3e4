use augmented_hessian::cli::{field_from_csv, field_to_csv};
use augmented_hessian::model::BoxDomain;
use augmented_hessian::solver::GridField;
use augmented_hessian::symfun::{
    binomial, cone_classify, elem_sym, elem_sym_all, elem_sym_grad, f_eval, matrix_sk, ConeLabel, EigenTuple, SymMat,
};
use augmented_hessian::verify::decompose;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Sum over all k-subsets of the product of their entries.
fn subset_sum(v: &[f64], k: usize) -> (f64, f64) {
    let n = v.len();
    let (mut s, mut scale) = (0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let p: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).product();
            s += p;
            scale += p.abs();
        }
    }
    (s, scale)
}

fn tuple_and_k(max_n: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1..=max_n).prop_flat_map(|n| (prop::collection::vec(-3.0..3.0f64, n), 1..=n))
}

fn sym_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(n, n, v);
        (&m + m.transpose()) * 0.5
    })
}

fn admissible(v: &[f64], k: usize) -> bool {
    cone_classify(&EigenTuple::new(v.to_vec()).unwrap(), k, 1e-9).unwrap().label == ConeLabel::Interior
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn elem_sym_matches_subsets((v, k) in tuple_and_k(7)) {
        let got = elem_sym(&EigenTuple::new(v.clone()).unwrap(), k).unwrap();
        let (want, scale) = subset_sum(&v, k);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn gradient_is_delete_one((v, k) in tuple_and_k(6)) {
        let g = elem_sym_grad(&EigenTuple::new(v.clone()).unwrap(), k).unwrap();
        for i in 0..v.len() {
            let rest: Vec<f64> = v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
            let (want, scale) = if k == 1 { (1.0, 1.0) } else { subset_sum(&rest, k - 1) };
            prop_assert!((g[i] - want).abs() <= 1e-12 * (1.0 + scale));
        }
    }

    #[test]
    fn cone_nesting_and_maclaurin((v, k) in tuple_and_k(6)) {
        let t = EigenTuple::new(v.clone()).unwrap();
        let s = elem_sym_all(&t, k).unwrap();
        if admissible(&v, k) {
            let n = v.len();
            for j in 1..k {
                prop_assert!(admissible(&v, j));
                let lo = (s[j + 1] / binomial(n, j + 1)).powf(1.0 / (j + 1) as f64);
                let hi = (s[j] / binomial(n, j)).powf(1.0 / j as f64);
                prop_assert!(lo <= hi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn f_is_concave_on_segments((v, k) in tuple_and_k(5), shift in prop::collection::vec(-1.0..1.0f64, 5), t in 0.0..1.0f64) {
        let w: Vec<f64> = v.iter().zip(&shift).map(|(a, b)| a + b).collect();
        prop_assume!(admissible(&v, k) && admissible(&w, k));
        let f = |x: &[f64]| f_eval(&EigenTuple::new(x.to_vec()).unwrap(), k).unwrap().value;
        let mid: Vec<f64> = v.iter().zip(&w).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let chord = (1.0 - t) * f(&v) + t * f(&w);
        prop_assert!(f(&mid) >= chord - 1e-12 * (1.0 + chord.abs()));
    }

    #[test]
    fn gradient_ordering_in_cone((v, k) in tuple_and_k(6)) {
        prop_assume!(admissible(&v, k));
        let g = elem_sym_grad(&EigenTuple::new(v.clone()).unwrap(), k).unwrap();
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] >= v[j] {
                    prop_assert!(g[i] <= g[j] + 1e-12 * (1.0 + g[j].abs()));
                }
            }
        }
    }

    #[test]
    fn matrix_sk_is_orthogonally_invariant(m in sym_matrix(4), r in sym_matrix(4), k in 1usize..=4) {
        let q = (r + DMatrix::identity(4, 4) * 3.0).qr().q();
        let w = SymMat::symmetrized(m.clone());
        let wq = SymMat::symmetrized(&q * &m * q.transpose());
        let (a, b) = (matrix_sk(&w, k).unwrap(), matrix_sk(&wq, k).unwrap());
        let scale = m.iter().map(|x| x.abs()).sum::<f64>().powi(k as i32);
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + scale));
    }

    #[test]
    fn decomposition_identity(m in sym_matrix(4), k in 1usize..=4, axis in 0usize..4) {
        let w = SymMat::symmetrized(m.clone());
        let d = decompose(&w, k, axis).unwrap();
        let sk = matrix_sk(&w, k).unwrap();
        let scale = m.iter().map(|x| x.abs()).sum::<f64>().powi(k as i32);
        prop_assert!((d.lhs - sk).abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn field_csv_round_trip(bits in prop::collection::vec(any::<u64>(), 12)) {
        let values: Vec<f64> = bits.iter().map(|&b| {
            let v = f64::from_bits(b);
            if v.is_finite() { v } else { 0.0 }
        }).collect();
        let d = BoxDomain::new(vec![-0.3, 1.0], vec![0.7, 5.0]).unwrap();
        let u = GridField::zeros(&d, &[3, 4]).unwrap().with_values(values).unwrap();
        let back = field_from_csv(&field_to_csv(&u)).unwrap();
        for (a, b) in back.values.iter().zip(&u.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.lo, u.lo);
        prop_assert_eq!(back.hi, u.hi);
    }
}
