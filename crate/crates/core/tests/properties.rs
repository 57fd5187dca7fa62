use ndarray::{Array2, ShapeBuilder};
use proptest::prelude::*;

use csdl::bounds::{lb_componentwise, lb_joint, ub_componentwise, ub_joint, BoundInputs};
use csdl::projections::{project_columns_to_sphere, project_nonneg_l11_ball, prox_nonneg_l1};
use csdl::tensor_ops::{lpq_norm, multi_convolve, valid_correlate, ConvolutionMatrix};

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(lo..hi, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols).f(), v).unwrap())
}

/// `(R, D)` with `R` of shape `(N - n + 1) x K` and `D` of shape `n x K`.
fn conformable(lo: f64) -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (1usize..20, 1usize..8, 1usize..4)
        .prop_flat_map(move |(m, n, k)| (matrix(m, k, lo, 3.0), matrix(n, k, -2.0, 2.0)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adjoint_identity((r, d) in conformable(-3.0), seed in any::<u64>()) {
        let x = multi_convolve(r.view(), d.view()).unwrap();
        let e: Vec<f64> = (0..x.len())
            .map(|i| ((seed.wrapping_add(i as u64 * 2654435761) % 1000) as f64 / 500.0) - 1.0)
            .collect();
        let lhs = dot(&e, x.as_slice());
        let mut rhs = 0.0;
        for k in 0..r.ncols() {
            let dk: Vec<f64> = d.column(k).to_vec();
            let rk: Vec<f64> = r.column(k).to_vec();
            rhs += dot(&valid_correlate(&e, &dk).unwrap(), &rk);
        }
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn bilinear_in_both_arguments(
        (r1, d) in conformable(-3.0),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let r2 = r1.mapv(|v| 0.5 * v - 1.0);
        let lhs = multi_convolve((&r1 * a + &r2 * b).view(), d.view()).unwrap();
        let x1 = multi_convolve(r1.view(), d.view()).unwrap();
        let x2 = multi_convolve(r2.view(), d.view()).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * x1.as_slice()[i] + b * x2.as_slice()[i];
            prop_assert!((lhs.as_slice()[i] - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        let d2 = d.mapv(|v| v * v - 0.5);
        let lhs = multi_convolve(r1.view(), (&d * a + &d2 * b).view()).unwrap();
        let y2 = multi_convolve(r1.view(), d2.view()).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * x1.as_slice()[i] + b * y2.as_slice()[i];
            prop_assert!((lhs.as_slice()[i] - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn single_atom_matches_convolution_matrix(r in prop::collection::vec(-3.0f64..3.0, 1..25), d in prop::collection::vec(-2.0f64..2.0, 1..8)) {
        let len = r.len() + d.len() - 1;
        let rm = Array2::from_shape_vec((r.len(), 1), r.clone()).unwrap();
        let dm = Array2::from_shape_vec((d.len(), 1), d.clone()).unwrap();
        let x = multi_convolve(rm.view(), dm.view()).unwrap();
        let t = ConvolutionMatrix::new(&d, len).unwrap();
        let expected = t.apply(&r).unwrap();
        prop_assert_eq!(x.as_slice(), expected.as_slice());
    }

    #[test]
    fn young_inequality((r, d) in conformable(0.0)) {
        let d = project_columns_to_sphere(d.view()).unwrap();
        let x = multi_convolve(r.view(), d.view()).unwrap();
        let l11 = lpq_norm(r.view(), 1.0, 1.0).unwrap();
        for q in [1.0, 2.0, f64::INFINITY] {
            let lhs = csdl::tensor_ops::lq_norm(x.as_slice(), q);
            let rhs = l11 * lpq_norm(d.view(), q, f64::INFINITY).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "q = {q}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn frobenius_norm(a in matrix(4, 3, -5.0, 5.0)) {
        let direct = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((lpq_norm(a.view(), 2.0, 2.0).unwrap() - direct).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn ball_projection_is_feasible_and_idempotent(r in matrix(5, 3, -3.0, 3.0), radius in 0.0f64..10.0) {
        let p = project_nonneg_l11_ball(r.view(), radius).unwrap();
        prop_assert!(p.values().iter().all(|v| *v >= 0.0));
        prop_assert!(p.l11_norm() <= radius + 1e-10);
        let again = project_nonneg_l11_ball(p.view(), radius).unwrap();
        prop_assert_eq!(again.values(), p.values());
    }

    #[test]
    fn ball_projection_is_nonexpansive(x in matrix(4, 2, -3.0, 3.0), y in matrix(4, 2, -3.0, 3.0), radius in 0.0f64..6.0) {
        let px = project_nonneg_l11_ball(x.view(), radius).unwrap();
        let py = project_nonneg_l11_ball(y.view(), radius).unwrap();
        prop_assert!(frobenius_distance(px.values(), py.values()) <= frobenius_distance(&x, &y) + 1e-12);
    }

    #[test]
    fn sphere_projection_is_idempotent(d in matrix(6, 3, -3.0, 3.0)) {
        let p = project_columns_to_sphere(d.view()).unwrap();
        for norm in p.column_norms() {
            prop_assert!((norm - 1.0).abs() <= 1e-12);
        }
        let again = project_columns_to_sphere(p.view()).unwrap();
        prop_assert!(frobenius_distance(again.values(), p.values()) <= 1e-12);
    }

    #[test]
    fn prox_is_nonnegative_and_idempotent_at_zero(r in matrix(5, 2, -3.0, 3.0), t in 0.0f64..2.0) {
        let p = prox_nonneg_l1(r.view(), t).unwrap();
        prop_assert!(p.values().iter().all(|v| *v >= 0.0));
        let clipped = prox_nonneg_l1(p.view(), 0.0).unwrap();
        prop_assert_eq!(clipped.values(), p.values());
    }

    #[test]
    fn bound_orderings(
        big_n in 2usize..100_000,
        n_frac in 0.0f64..1.0,
        lambda in 0.0f64..1e4,
        sigma in 0.0f64..10.0,
    ) {
        let n = 1 + ((big_n - 1) as f64 * n_frac) as usize;
        let b = BoundInputs::new(big_n, n, lambda, sigma);
        prop_assert!(lb_joint(&b) <= lb_componentwise(&b));
        prop_assert!(ub_joint(&b) <= ub_componentwise(&b) * (1.0 + 1e-12));
        let positions = (big_n - n + 1) as f64;
        if positions > 1.0 && lambda >= sigma * (n as f64 * positions.ln()).sqrt() {
            prop_assert!(lb_joint(&b) <= ub_joint(&b));
            prop_assert!(lb_componentwise(&b) <= ub_componentwise(&b));
        }
        let louder = BoundInputs::new(big_n, n, lambda, sigma * 1.5 + 0.1);
        prop_assert!(ub_joint(&louder) >= ub_joint(&b));
        prop_assert!(lb_componentwise(&louder) >= lb_componentwise(&b));
        let bigger = BoundInputs::new(big_n, n, lambda * 2.0 + 1.0, sigma);
        prop_assert!(ub_componentwise(&bigger) >= ub_componentwise(&b));
        prop_assert!(lb_joint(&bigger) >= lb_joint(&b));
    }
}
