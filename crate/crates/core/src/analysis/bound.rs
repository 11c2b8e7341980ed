use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::TallMatrix;
use crate::recovery::{angular_phase, AlectonConfig, TraceMonitor};
use crate::sampling::SampleSource;
use crate::seed::{derive_seed, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    pub t: f64,
    pub gamma: f64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub epsilon: f64,
    pub sigma_a_sq: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub zp_term: f64,
    pub log_term: f64,
    pub total: f64,
    /// `np²/(γqε) ≤ 1`, outside the range the bound is derived for.
    pub log_argument_small: bool,
}

/// `P(F_t) ≤ Z_p(γ) + 4nσ_a²p²(p + ε)/(Δ²γεt) · log(np²/(γqε))`.
pub fn failure_bound(inputs: BoundInputs, zp: f64) -> Result<BoundReport> {
    let BoundInputs { t, gamma, n, p, q, epsilon, sigma_a_sq, delta } = inputs;
    let positive = [t, gamma, epsilon, sigma_a_sq, delta].iter().all(|v| *v > 0.0 && v.is_finite());
    if !positive || n == 0 || p == 0 || q == 0 {
        return Err(Error::Parameter("failure bound needs positive, finite inputs".into()));
    }
    if gamma > 1.0 {
        return Err(Error::Parameter(format!("failure bound needs gamma <= 1, got {gamma}")));
    }
    let (nf, pf, qf) = (n as f64, p as f64, q as f64);
    let argument = nf * pf * pf / (gamma * qf * epsilon);
    let coefficient = 4.0 * nf * sigma_a_sq * pf * pf * (pf + epsilon) / (delta * delta * gamma * epsilon * t);
    let log_term = coefficient * argument.ln();
    Ok(BoundReport { inputs, zp_term: zp, log_term, total: zp + log_term, log_argument_small: argument <= 1.0 })
}

/// Wilson score interval at 95% for `failures` out of `trials`.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let phat = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (phat + z * z / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if failures == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if failures == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub converged: bool,
    pub steps_to_success: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureReport {
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub outcomes: Vec<TrialOutcome>,
}

impl FailureReport {
    /// Half-width of the Wilson interval.
    pub fn ci(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// `trial,converged,steps_to_success` rows preceded by `# key=value` lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[(String, String)]) -> io::Result<()> {
        for (k, v) in header {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "trial,converged,steps_to_success")?;
        for o in &self.outcomes {
            let steps = o.steps_to_success.map(|s| s.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{}", o.trial, o.converged, steps)?;
        }
        Ok(())
    }
}

/// Runs `trials` independent angular phases of at most `t` steps, each
/// stopping at its first recorded success. Trial `i` is seeded with
/// `derive_seed(config.seed, i)`.
pub fn empirical_failure_rate<S: SampleSource + ?Sized>(
    sampler: &S,
    config: &AlectonConfig,
    basis: &TallMatrix,
    trials: usize,
    t: usize,
) -> Result<FailureReport> {
    if trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    let mut cfg = config.clone();
    cfg.k_steps = t;
    let mut monitor = TraceMonitor::new(basis.clone(), config.epsilon);
    monitor.stop_on_success = true;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(derive_seed(config.seed, trial as u64), 0);
            let run = angular_phase(sampler, &cfg, Some(&monitor), &mut rng)?;
            let steps_to_success = run.trace.first_success();
            Ok(TrialOutcome { trial, converged: steps_to_success.is_some(), steps_to_success })
        })
        .collect::<Result<_>>()?;
    let failures = outcomes.iter().filter(|o| !o.converged).count();
    let (ci_low, ci_high) = wilson_interval(failures, trials);
    Ok(FailureReport { trials, failures, rate: failures as f64 / trials as f64, ci_low, ci_high, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> BoundInputs {
        BoundInputs { t: 1e7, gamma: 0.022, n: 100, p: 1, q: 1, epsilon: 0.1, sigma_a_sq: 1.0, delta: 1.0 }
    }

    #[test]
    fn bound_example() {
        let r = failure_bound(example(), 0.0).unwrap();
        let want = 4.0 * 100.0 * 1.1 / (0.022 * 0.1 * 1e7) * (100.0f64 / (0.022 * 0.1)).ln();
        assert!((r.log_term - want).abs() < 1e-15);
        assert!((r.log_term - 0.2144).abs() < 1e-3);
        assert!(!r.log_argument_small);
    }

    #[test]
    fn bound_scaling() {
        let a = failure_bound(example(), 0.1).unwrap();
        let b = failure_bound(BoundInputs { t: 2e7, ..example() }, 0.1).unwrap();
        assert!((a.log_term / b.log_term - 2.0).abs() < 1e-12);
        let far = failure_bound(BoundInputs { t: 1e15, ..example() }, 0.1).unwrap();
        assert!((far.total - 0.1).abs() < 1e-8);
        assert!(failure_bound(BoundInputs { gamma: 2.0, ..example() }, 0.1).is_err());
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 200);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.018_84).abs() < 1e-4);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }
}
