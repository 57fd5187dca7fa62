//! Euclidean projections onto the solver's feasible sets and the proximal
//! step of the penalized objective.

use ndarray::{Array2, ArrayView2, ShapeBuilder};

use crate::error::{CsdlError, Result};
use crate::tensor_ops::{Dictionary, EncodingMatrix};

fn check_finite(a: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CsdlError::Numerical(format!("{what} has a non-finite entry")))
    }
}

fn column_major_copy(a: &ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim().f());
    out.assign(a);
    out
}

/// Rescales every column to unit L2 norm.
///
/// A zero column has no direction to keep; it becomes the first canonical basis vector.
pub fn project_columns_to_sphere(d: ArrayView2<'_, f64>) -> Result<Dictionary> {
    check_finite(&d, "dictionary")?;
    if d.nrows() == 0 || d.ncols() == 0 {
        return Err(CsdlError::Dimension("dictionary must be at least 1 x 1".into()));
    }
    let mut out = column_major_copy(&d);
    for mut col in out.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            col[0] = 1.0;
        } else {
            col.mapv_inplace(|v| v / norm);
        }
    }
    Ok(Dictionary::from_array_unchecked(out))
}

/// Water-filling threshold `τ ≥ 0` with `Σ max(v_i - τ, 0) = radius` for
/// nonnegative `values` whose sum exceeds `radius`.
fn water_filling_threshold(values: &[f64], radius: f64) -> f64 {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if v > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

/// Projection in Frobenius norm onto `{M ≥ 0, ‖M‖_{1,1} ≤ radius}`.
///
/// The constraint is on the whole matrix, so this is the vector projection
/// onto the nonnegative L1 ball applied to the flattened entries: clip
/// negatives, then subtract the water-filling threshold if the budget is exceeded.
pub fn project_nonneg_l11_ball(r: ArrayView2<'_, f64>, radius: f64) -> Result<EncodingMatrix> {
    if !(radius >= 0.0) {
        return Err(CsdlError::Parameter(format!("L1 radius must be >= 0, got {radius}")));
    }
    check_finite(&r, "encoding")?;
    let mut out = column_major_copy(&r);
    if radius == 0.0 {
        out.fill(0.0);
        return Ok(EncodingMatrix::from_array_unchecked(out));
    }
    out.mapv_inplace(|v| v.max(0.0));
    let total: f64 = out.iter().sum();
    if total > radius {
        let flat = out.as_slice_memory_order().expect("contiguous copy");
        let mut tau = water_filling_threshold(flat, radius);
        let shifted = |tau: f64| {
            let mut m = out.clone();
            m.mapv_inplace(|v| (v - tau).max(0.0));
            m
        };
        let mut projected = shifted(tau);
        // Rounding can leave the sum a few ulps above the radius; nudge τ up
        // so the result is feasible and a second projection leaves it unchanged.
        for _ in 0..64 {
            let excess = projected.iter().sum::<f64>() - radius;
            if excess <= 0.0 {
                break;
            }
            let active = projected.iter().filter(|v| **v > 0.0).count().max(1) as f64;
            let next = tau + excess / active;
            tau = if next > tau { next } else { tau.next_up() };
            projected = shifted(tau);
        }
        out = projected;
    }
    Ok(EncodingMatrix::from_array_unchecked(out))
}

/// Proximal operator of `threshold · ‖·‖_{1,1}` plus the nonnegativity
/// indicator: entrywise `max(v - threshold, 0)`.
pub fn prox_nonneg_l1(r: ArrayView2<'_, f64>, threshold: f64) -> Result<EncodingMatrix> {
    if !(threshold >= 0.0) {
        return Err(CsdlError::Parameter(format!(
            "shrinkage threshold must be >= 0, got {threshold}"
        )));
    }
    check_finite(&r, "encoding")?;
    let mut out = column_major_copy(&r);
    out.mapv_inplace(|v| (v - threshold).max(0.0));
    Ok(EncodingMatrix::from_array_unchecked(out))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    use super::*;

    #[test]
    fn sphere_examples() {
        let d = array![[3.0, 0.0, 0.6], [4.0, 0.0, 0.8]];
        let p = project_columns_to_sphere(d.view()).unwrap();
        let v = p.values();
        assert_abs_diff_eq!(v[[0, 0]], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[[1, 0]], 0.8, epsilon = 1e-15);
        assert_eq!(v.column(1).to_vec(), vec![1.0, 0.0]);
        assert_abs_diff_eq!(v[[0, 2]], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[[1, 2]], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn sphere_rejects_non_finite() {
        let d = array![[f64::NAN], [1.0]];
        assert!(matches!(
            project_columns_to_sphere(d.view()),
            Err(CsdlError::Numerical(_))
        ));
    }

    #[test]
    fn ball_example() {
        let r = array![[0.5], [-0.3], [0.7]];
        let p = project_nonneg_l11_ball(r.view(), 1.0).unwrap();
        let v = p.values().column(0).to_vec();
        assert_abs_diff_eq!(v[0], 0.4, epsilon = 1e-15);
        assert_eq!(v[1], 0.0);
        assert_abs_diff_eq!(v[2], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn ball_keeps_feasible_points_and_zero_radius() {
        let r = array![[0.2, 0.0], [0.1, 0.3]];
        let p = project_nonneg_l11_ball(r.view(), 1.0).unwrap();
        assert_eq!(p.values(), &r);
        let p = project_nonneg_l11_ball(r.view(), 0.0).unwrap();
        assert!(p.values().iter().all(|v| *v == 0.0));
        assert!(matches!(
            project_nonneg_l11_ball(r.view(), -1.0),
            Err(CsdlError::Parameter(_))
        ));
    }

    #[test]
    fn ball_on_matrix_flattens() {
        // A per-column budget would leave [1, 1]; the shared budget gives tau = 1.
        let r = array![[2.0, 1.0]];
        let p = project_nonneg_l11_ball(r.view(), 1.0).unwrap();
        assert_eq!(p.values(), &array![[1.0, 0.0]]);
    }

    #[test]
    fn prox_examples() {
        let r = array![[0.5], [-0.3], [0.7]];
        let p = prox_nonneg_l1(r.view(), 0.2).unwrap();
        let v = p.values().column(0).to_vec();
        assert_abs_diff_eq!(v[0], 0.3, epsilon = 1e-15);
        assert_eq!(v[1], 0.0);
        assert_abs_diff_eq!(v[2], 0.5, epsilon = 1e-15);

        let p = prox_nonneg_l1(r.view(), 0.0).unwrap();
        assert_eq!(p.values().column(0).to_vec(), vec![0.5, 0.0, 0.7]);

        let p = prox_nonneg_l1(r.view(), 0.7).unwrap();
        assert!(p.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn prox_matches_grid_minimization() {
        // argmin_{m >= 0} (m - v)^2 / 2 + t m, by scanning a fine grid.
        let t = 0.2;
        for v in [0.5, -0.3, 0.7] {
            let best = (0..=20_000)
                .map(|i| i as f64 * 1e-4)
                .min_by(|a, b| {
                    let fa = 0.5 * (a - v) * (a - v) + t * a;
                    let fb = 0.5 * (b - v) * (b - v) + t * b;
                    fa.total_cmp(&fb)
                })
                .unwrap();
            let p = prox_nonneg_l1(Array2::from_elem((1, 1), v).view(), t).unwrap();
            assert_abs_diff_eq!(p.values()[[0, 0]], best, epsilon = 1e-4);
        }
    }

    #[test]
    fn threshold_solves_water_filling_equation() {
        let v = [3.0, 1.0, 0.5, 0.25];
        let tau = water_filling_threshold(&v, 2.0);
        let mass: f64 = v.iter().map(|x| (x - tau).max(0.0)).sum();
        assert_abs_diff_eq!(mass, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(tau, 1.0, epsilon = 1e-14);
    }
}
