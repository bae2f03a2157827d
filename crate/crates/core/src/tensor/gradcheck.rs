//! Central finite-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::tensor::{NodeId, Parameters, Tape};

/// Gradients smaller than this are compared in absolute rather than relative
/// terms; below it, central differences at h = 1e-5 are dominated by round-off.
pub const RELATIVE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the worst entry.
    pub worst_entry: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares the tape gradient of `loss_fn` with central differences for
/// every entry of every parameter.
///
/// `loss_fn` records a scalar loss on the supplied fresh tape, reading the
/// parameters it is handed, and returns the output node.
pub fn finite_diff_check<F>(params: &Parameters, h: f64, tol: f64, loss_fn: F) -> Result<GradCheckReport>
where
    F: Fn(&Parameters, &mut Tape) -> Result<NodeId>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let eval = |p: &Parameters| -> Result<f64> {
        let mut tape = Tape::new();
        let out = loss_fn(p, &mut tape)?;
        let v = tape.scalar(out)?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss evaluated to {v}")));
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let out = loss_fn(params, &mut tape)?;
    let base = tape.scalar(out)?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss evaluated to {base}")));
    }
    let analytic = tape.backward(out)?.params();

    let mut probe = params.clone();
    let mut per_param = Vec::with_capacity(params.len());
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in names {
        let grad = analytic
            .get(&name)
            .ok_or_else(|| Error::Contract(format!("loss never registered parameter `{name}`")))?;
        let mut check = ParamCheck {
            name: name.clone(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_entry: 0,
        };
        for k in 0..grad.len() {
            let original = probe.get(&name)?.data()[k];
            probe.get_mut(&name)?.data_mut()[k] = original + h;
            let plus = eval(&probe)?;
            probe.get_mut(&name)?.data_mut()[k] = original - h;
            let minus = eval(&probe)?;
            probe.get_mut(&name)?.data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[k];
            let rel = relative_error(a, numeric);
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst_entry = k;
            }
        }
        per_param.push(check);
    }
    let max_rel_error = per_param.iter().fold(0.0, |m: f64, c| m.max(c.max_rel_error));
    Ok(GradCheckReport {
        per_param,
        max_rel_error,
        tolerance: tol,
        passed: max_rel_error < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{glorot_init, Dense};

    #[test]
    fn quadratic_loss_is_tight() {
        for seed in 0..5 {
            let mut p = Parameters::new();
            p.insert("w", glorot_init(3, 4, seed).unwrap());
            let report = finite_diff_check(&p, 1e-5, 1e-6, |p, t| {
                let w = t.param("w", p.get("w")?);
                let sq = t.square(w);
                Ok(t.sum(sq))
            })
            .unwrap();
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn constant_loss_has_zero_errors() {
        let mut p = Parameters::new();
        p.insert("w", glorot_init(2, 2, 3).unwrap());
        let report = finite_diff_check(&p, 1e-5, 1e-6, |p, t| {
            let _ = t.param("w", p.get("w")?);
            Ok(t.constant(Dense::scalar(4.0)))
        })
        .unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert!(report.passed);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut p = Parameters::new();
        p.insert("w", Dense::scalar(-1.0));
        let err = finite_diff_check(&p, 1e-5, 1e-6, |p, t| {
            let w = t.param("w", p.get("w")?);
            Ok(t.ln(w))
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn rejects_non_positive_step() {
        let p = Parameters::new();
        assert!(finite_diff_check(&p, 0.0, 1e-6, |_, t| Ok(t.constant(Dense::scalar(0.0)))).is_err());
    }
}
