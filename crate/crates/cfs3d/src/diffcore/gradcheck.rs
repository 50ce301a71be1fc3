//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

/// Outcome of a finite-difference sweep over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Relative error per coordinate, same layout as the checked vector.
    pub coord_errors: Vec<f64>,
    /// Worst coordinate error.
    pub max_error: f64,
}

/// Compare `analytic` against central differences of `f` around `params`.
///
/// Error per coordinate is `|analytic − numeric| / max(1, |analytic|,
/// |numeric|)` — the `max(1, …)` denominator keeps near-zero gradients from
/// inflating the ratio. `f` must be deterministic; a non-finite value of `f`
/// is a numeric error.
pub fn finite_diff_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if analytic.len() != params.len() {
        return Err(Error::Dimension(format!(
            "gradient has {} coordinates, params have {}",
            analytic.len(),
            params.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference eps must be > 0, got {eps}")));
    }
    let mut work = params.to_vec();
    let mut coord_errors = Vec::with_capacity(params.len());
    let mut max_error: f64 = 0.0;
    for i in 0..params.len() {
        let saved = work[i];
        work[i] = saved + eps;
        let hi = f(&work)?;
        work[i] = saved - eps;
        let lo = f(&work)?;
        work[i] = saved;
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::Numeric(format!(
                "function value non-finite while probing coordinate {i}"
            )));
        }
        let numeric = (hi - lo) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / 1.0_f64.max(analytic[i].abs()).max(numeric.abs());
        max_error = max_error.max(err);
        coord_errors.push(err);
    }
    Ok(GradCheckReport {
        coord_errors,
        max_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_matches_analytic_gradient() {
        // f(x) = Σ x_i², ∇f = 2x.
        let params = vec![0.3, -1.7, 2.4];
        let analytic: Vec<f64> = params.iter().map(|x| 2.0 * x).collect();
        let rep = finite_diff_check(
            |p| Ok(p.iter().map(|x| x * x).sum()),
            &params,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(rep.max_error < 1e-6, "max error {}", rep.max_error);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let params = vec![1.0, 2.0];
        let rep = finite_diff_check(|_| Ok(42.0), &params, &[0.0, 0.0], 1e-5).unwrap();
        assert_eq!(rep.max_error, 0.0);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let params = vec![1.0];
        let rep = finite_diff_check(
            |p| Ok(p[0] * p[0]),
            &params,
            &[3.0], // true gradient is 2.0
            1e-5,
        )
        .unwrap();
        assert!(rep.max_error > 0.3, "max error {}", rep.max_error);
    }

    #[test]
    fn non_finite_function_value_is_numeric_error() {
        let err = finite_diff_check(|p| Ok(1.0 / (p[0] - 1.0)), &[1.0 - 1e-5], &[0.0], 1e-5)
            .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
