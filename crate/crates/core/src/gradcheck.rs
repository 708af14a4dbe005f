//! Central-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};

/// Worst disagreement found by [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

/// Compares analytic gradients of the scalar built by `f` against central
/// differences, entry by entry over every parameter in `params`.
///
/// The error for one entry is `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn gradient_check<S, F>(f: F, params: &ParameterStore<S>, epsilon: f64) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&ParameterStore<S>, &mut Tape<S>) -> Result<NodeId>,
{
    let names: Vec<String> = params.names().map(str::to_string).collect();
    gradient_check_subset(f, params, &names, epsilon)
}

/// [`gradient_check`] restricted to the named parameters.
pub fn gradient_check_subset<S, F>(
    f: F,
    params: &ParameterStore<S>,
    names: &[String],
    epsilon: f64,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&ParameterStore<S>, &mut Tape<S>) -> Result<NodeId>,
{
    if !(1e-7..=1e-4).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "gradient-check epsilon {epsilon} outside [1e-7, 1e-4]"
        )));
    }
    let mut tape = Tape::new();
    let loss = f(params, &mut tape)?;
    let grads = tape.backward(loss)?;

    let eval = |store: &ParameterStore<S>, name: &str| -> Result<f64> {
        let mut t = Tape::new();
        let l = f(store, &mut t)?;
        let v = t.value(l).item().to_f64().unwrap_or(f64::NAN);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(name.to_string()))
        }
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    for name in names {
        let n = params.get(name)?.numel();
        let analytic = grads.param(name).unwrap_or_else(|| vec![S::zero(); n]);
        for (i, g) in analytic.iter().enumerate() {
            let a = g.to_f64().unwrap_or(f64::NAN);
            if !a.is_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
            let orig = params.get(name)?.data()[i];
            probe.get_mut(name)?.data_mut()[i] = orig + S::lit(epsilon);
            let plus = eval(&probe, name)?;
            probe.get_mut(name)?.data_mut()[i] = orig - S::lit(epsilon);
            let minus = eval(&probe, name)?;
            probe.get_mut(name)?.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.entries_checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
