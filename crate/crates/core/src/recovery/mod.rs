//! The two-phase recovery algorithm and its one-at-a-time variant.

mod metrics;
mod trace;

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

pub use metrics::{success_metric, tau_metric, SuccessCheck};
pub use trace::{ConvergenceTrace, TraceRecord};

use crate::error::{Error, Result};
use crate::linalg::{dot, random_orthonormal, SmallSymmetric, TallMatrix, Vector};
use crate::sampling::{GroundTruth, SampleSource, Sampler, TripletMatrix};
use crate::seed::{derive_seed, stream_rng};

/// Entries above this magnitude abort the angular phase.
pub const DIVERGENCE_LIMIT: f64 = 1e100;

const ANGULAR_STREAM: u64 = 0;
const RADIAL_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct AlectonConfig {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub k_steps: usize,
    pub l_steps: usize,
    pub seed: u64,
    /// Renormalize every this many steps; 0 disables it.
    pub renorm_every: usize,
    /// Record diagnostics every this many steps; 0 records only the ends.
    pub trace_every: usize,
}

impl AlectonConfig {
    /// Defaults: `q = p`, `ε = 0.1`, `K = ⌈50 ε⁻¹ n ln n⌉`, `L = 10⁴`,
    /// renormalization every 1000 steps, a record every `n/10` steps.
    pub fn new(n: usize, p: usize, eta: f64) -> Self {
        let epsilon = 0.1;
        Self {
            n,
            p,
            q: p,
            epsilon,
            eta,
            k_steps: default_k_steps(n, epsilon),
            l_steps: 10_000,
            seed: 0,
            renorm_every: 1000,
            trace_every: (n / 10).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q < self.p {
            return Err(Error::Config(format!("need q >= p >= 1, got p={}, q={}", self.p, self.q)));
        }
        if self.q > self.n {
            return Err(Error::Config(format!("q={} exceeds n={}", self.q, self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Config(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if self.k_steps == 0 || self.l_steps == 0 {
            return Err(Error::Config("K and L must be at least 1".into()));
        }
        Ok(())
    }
}

/// `⌈50 ε⁻¹ n ln n⌉`, at least 1.
pub fn default_k_steps(n: usize, epsilon: f64) -> usize {
    let n = n as f64;
    ((50.0 / epsilon * n * n.ln()).ceil() as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizeReport {
    pub gamma: f64,
    pub satisfied: bool,
    /// The step size giving `γ = 1`.
    pub eta_max: f64,
}

/// `γ = 2nσ_a²p²(p + ε)η / (Δε)`.
pub fn compute_gamma(eta: f64, n: usize, p: usize, epsilon: f64, sigma_a_sq: f64, delta: f64) -> Result<StepSizeReport> {
    if !(delta > 0.0) {
        return Err(Error::DegenerateEigengap(delta));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let p = p as f64;
    let per_eta = 2.0 * n as f64 * sigma_a_sq * p * p * (p + epsilon) / (delta * epsilon);
    let gamma = per_eta * eta;
    let eta_max = if per_eta > 0.0 { 1.0 / per_eta } else { f64::INFINITY };
    Ok(StepSizeReport { gamma, satisfied: gamma <= 1.0, eta_max })
}

/// Diagnostics recorded during the angular phase. The algorithm itself never
/// looks at the target subspace.
#[derive(Clone, Debug)]
pub struct TraceMonitor {
    /// Orthonormal basis of the target subspace (`n × q`).
    pub basis: TallMatrix,
    pub epsilon: f64,
    /// When present, `τ` is recorded with this `γ`.
    pub gamma: Option<f64>,
    pub stop_on_success: bool,
}

impl TraceMonitor {
    pub fn new(basis: TallMatrix, epsilon: f64) -> Self {
        Self { basis, epsilon, gamma: None, stop_on_success: false }
    }

    fn record(&self, y: &TallMatrix, step: usize, start: Instant) -> Result<TraceRecord> {
        let check = success_metric(y, &self.basis, self.epsilon)?;
        let tau = match self.gamma {
            Some(g) if g > 0.0 => Some(tau_metric(y, &self.basis, g, y.nrows(), y.ncols(), self.basis.ncols())?),
            _ => None,
        };
        Ok(TraceRecord {
            step,
            rho: check.lambda_min_ratio,
            tau,
            succeeded: check.succeeded,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

#[derive(Clone, Debug)]
pub struct AngularOutcome {
    pub y_hat: TallMatrix,
    pub trace: ConvergenceTrace,
    /// Steps actually taken (fewer than `K` when stopped at success).
    pub steps: usize,
}

fn check_source<S: SampleSource + ?Sized>(sampler: &S, config: &AlectonConfig) -> Result<()> {
    config.validate()?;
    if sampler.dim() != config.n {
        return Err(Error::Config(format!("sampler dimension {} but n = {}", sampler.dim(), config.n)));
    }
    if config.p > 1 && !sampler.rank_condition_holds() {
        return Err(Error::Config("samples of rank above one need p = 1".into()));
    }
    Ok(())
}

/// `Y ← Y + ηÃY` for `K` steps from a uniformly random orthonormal start,
/// returning the orthonormalized iterate.
pub fn angular_phase<S: SampleSource + ?Sized>(
    sampler: &S,
    config: &AlectonConfig,
    monitor: Option<&TraceMonitor>,
    rng: &mut ChaCha8Rng,
) -> Result<AngularOutcome> {
    check_source(sampler, config)?;
    let start = Instant::now();
    let y = random_orthonormal(config.n, config.p, rng)?;
    angular_from(sampler, config, monitor, y, rng, start)
}

/// The angular phase from a given starting iterate.
pub fn angular_phase_from<S: SampleSource + ?Sized>(
    sampler: &S,
    config: &AlectonConfig,
    monitor: Option<&TraceMonitor>,
    y0: TallMatrix,
    rng: &mut ChaCha8Rng,
) -> Result<AngularOutcome> {
    check_source(sampler, config)?;
    if y0.nrows() != config.n || y0.ncols() != config.p {
        return Err(Error::Dimension(format!(
            "initial iterate is {}x{}, config wants {}x{}",
            y0.nrows(),
            y0.ncols(),
            config.n,
            config.p
        )));
    }
    angular_from(sampler, config, monitor, y0, rng, Instant::now())
}

fn angular_from<S: SampleSource + ?Sized>(
    sampler: &S,
    config: &AlectonConfig,
    monitor: Option<&TraceMonitor>,
    mut y: TallMatrix,
    rng: &mut ChaCha8Rng,
    start: Instant,
) -> Result<AngularOutcome> {
    let mut trace = ConvergenceTrace::new();
    if let Some(m) = monitor {
        let r = m.record(&y, 0, start)?;
        trace.push(r);
        if r.succeeded && m.stop_on_success {
            return Ok(AngularOutcome { y_hat: y.orthonormalized()?, trace, steps: 0 });
        }
    }
    let mut steps = 0;
    for k in 1..=config.k_steps {
        let op = sampler.draw(rng);
        let written = op.step(&mut y, config.eta);
        if !(written <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step: k });
        }
        steps = k;
        if config.renorm_every > 0 && k % config.renorm_every == 0 {
            y = y.orthonormalized()?;
        }
        let due = k == config.k_steps || (config.trace_every > 0 && k % config.trace_every == 0);
        if let (Some(m), true) = (monitor, due) {
            let r = m.record(&y, k, start)?;
            trace.push(r);
            if r.succeeded && m.stop_on_success {
                break;
            }
        }
    }
    Ok(AngularOutcome { y_hat: y.orthonormalized()?, trace, steps })
}

/// `R̄ = (1/L) Σ ŶᵀÃ_lŶ`, symmetrized.
pub fn radial_phase<S: SampleSource + ?Sized>(
    sampler: &S,
    y_hat: &TallMatrix,
    l_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SmallSymmetric> {
    if l_steps == 0 {
        return Err(Error::Config("L must be at least 1".into()));
    }
    if y_hat.nrows() != sampler.dim() {
        return Err(Error::Dimension(format!("iterate has {} rows, sampler dimension {}", y_hat.nrows(), sampler.dim())));
    }
    let p = y_hat.ncols();
    let mut acc = vec![0.0; p * p];
    for _ in 0..l_steps {
        sampler.draw(rng).accumulate_projection(y_hat, &mut acc);
    }
    acc.iter_mut().for_each(|x| *x /= l_steps as f64);
    SmallSymmetric::new(p, acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    pub factor: TallMatrix,
    /// Number of negative eigenvalues of `R̄` set to zero.
    pub clipped: usize,
}

/// `Ŷ R̄^{1/2}` after clipping negative eigenvalues of `R̄` to zero.
pub fn assemble(y_hat: &TallMatrix, r_bar: &SmallSymmetric) -> Result<Assembly> {
    let eig = r_bar.eigen()?;
    let clipped = eig.values.iter().filter(|&&l| l < 0.0).count();
    let root = eig.map_values(|l| l.max(0.0).sqrt());
    Ok(Assembly { factor: y_hat.mul_small(&root)?, clipped })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RecoverOptions {
    /// Run even when `γ > 1`.
    pub force: bool,
    /// Skip the radial phase; the factor is then `Ŷ` itself.
    pub angular_only: bool,
    /// Record `ρ` (and `τ`) against the true target subspace.
    pub monitor: bool,
    pub stop_on_success: bool,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub y_hat: TallMatrix,
    pub r_bar: Option<SmallSymmetric>,
    pub factor: TallMatrix,
    pub clipped: usize,
    pub trace: ConvergenceTrace,
    pub steps: usize,
    pub step_size: StepSizeReport,
    pub wall_ms: f64,
}

/// Angular phase, radial phase and assembly. The angular phase draws from
/// stream 0 of `config.seed`, the radial phase from stream 1.
pub fn recover(sampler: &Sampler, config: &AlectonConfig, options: RecoverOptions) -> Result<RecoveryResult> {
    config.validate()?;
    let start = Instant::now();
    let delta = sampler.target_eigengap(config.q)?;
    let variance = sampler.variance()?;
    let step_size = compute_gamma(config.eta, config.n, config.p, config.epsilon, variance.params.sigma_a_sq, delta)?;
    if !step_size.satisfied && !options.force {
        return Err(Error::Config(format!(
            "step size infeasible: gamma = {:.6e} > 1 (eta_max = {:.6e})",
            step_size.gamma, step_size.eta_max
        )));
    }
    let monitor = if options.monitor {
        let mut m = TraceMonitor::new(sampler.target_basis(config.q)?, config.epsilon);
        let c = step_size.gamma * config.q as f64 / (config.n * config.p * config.p) as f64;
        if c > 0.0 && c <= 1.0 {
            m.gamma = Some(step_size.gamma);
        }
        m.stop_on_success = options.stop_on_success;
        Some(m)
    } else {
        None
    };
    let mut rng = stream_rng(config.seed, ANGULAR_STREAM);
    let angular = angular_phase(sampler, config, monitor.as_ref(), &mut rng)?;
    let (r_bar, factor, clipped) = if options.angular_only {
        (None, angular.y_hat.clone(), 0)
    } else {
        let mut rng = stream_rng(config.seed, RADIAL_STREAM);
        let r_bar = radial_phase(sampler, &angular.y_hat, config.l_steps, &mut rng)?;
        let a = assemble(&angular.y_hat, &r_bar)?;
        (Some(r_bar), a.factor, a.clipped)
    };
    Ok(RecoveryResult {
        y_hat: angular.y_hat,
        r_bar,
        factor,
        clipped,
        trace: angular.trace,
        steps: angular.steps,
        step_size,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Debug)]
pub struct OneAtATime {
    pub components: Vec<Vector>,
    pub runs: Vec<RecoveryResult>,
}

impl OneAtATime {
    /// `Σ_{i<k} y_i y_iᵀ` as a dense row-major matrix.
    pub fn estimate_dense(&self, k: usize) -> Vec<f64> {
        let n = self.components.first().map_or(0, |y| y.len());
        let mut out = vec![0.0; n * n];
        for y in &self.components[..k] {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += y[i] * y[j];
                }
            }
        }
        out
    }

    /// `‖Σ_{i<k} y_i y_iᵀ − A‖_F / ‖A‖_F` against a dense `A`.
    pub fn relative_residual(&self, k: usize, truth_dense: &[f64]) -> f64 {
        let est = self.estimate_dense(k);
        let diff: f64 = est.iter().zip(truth_dense).map(|(a, b)| (a - b).powi(2)).sum();
        let base: f64 = truth_dense.iter().map(|b| b * b).sum();
        (diff / base).sqrt()
    }

    /// The same ratio without forming `A`:
    /// `‖A‖_F² − 2 Σ yᵢᵀAyᵢ + Σ (yᵢᵀyⱼ)²` under the square root.
    pub fn relative_residual_to(&self, k: usize, truth: &GroundTruth) -> f64 {
        let ys = &self.components[..k];
        let base = truth.frobenius_sq();
        let cross: f64 = ys.iter().map(|y| dot(y, &truth.matvec(y))).sum();
        let gram: f64 = ys.iter().flat_map(|a| ys.iter().map(move |b| dot(a, b).powi(2))).sum();
        ((base - 2.0 * cross + gram).max(0.0) / base).sqrt()
    }

    /// Root-mean-square error over the stored entries of a rectangular
    /// matrix, reading `M ≈ 2 Σ y_top y_bottomᵀ` off the symmetric embedding.
    pub fn triplet_rmse(&self, k: usize, m: &TripletMatrix) -> f64 {
        let rows = m.rows();
        let mut sum = 0.0;
        for (i, j, v) in m.observed() {
            let est: f64 = self.components[..k].iter().map(|y| 2.0 * y[i] * y[rows + j]).sum();
            sum += (est - v).powi(2);
        }
        (sum / m.count() as f64).sqrt()
    }
}

/// Recovers `count` components one at a time, each with `p = q = 1` on the
/// sampler deflated by the components found so far. Component 0 uses
/// `config.seed`; component `i` uses a seed derived from it.
pub fn one_at_a_time(base: &Sampler, count: usize, config: &AlectonConfig, options: RecoverOptions) -> Result<OneAtATime> {
    if count == 0 {
        return Err(Error::Config("need at least one component".into()));
    }
    let mut components: Vec<Vector> = Vec::with_capacity(count);
    let mut runs = Vec::with_capacity(count);
    for i in 0..count {
        let fail = |e: Error| Error::Component { index: i + 1, source: Box::new(e) };
        let sampler = base.deflate(&components).map_err(fail)?;
        let mut cfg = config.clone();
        cfg.p = 1;
        cfg.q = 1;
        if i > 0 {
            cfg.seed = derive_seed(config.seed, i as u64);
        }
        let run = recover(&sampler, &cfg, options).map_err(fail)?;
        components.push(run.factor.column(0));
        runs.push(run);
    }
    Ok(OneAtATime { components, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{SamplerKind, SpectralTruth};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn diag(values: &[f64]) -> Sampler {
        let t = GroundTruth::Spectral(SpectralTruth::diagonal(values).unwrap());
        Sampler::new(SamplerKind::Exact, Arc::new(t)).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let r = compute_gamma(1e-5, 100, 1, 0.1, 1.0, 1.0).unwrap();
        assert!((r.gamma - 0.022).abs() < 1e-15);
        assert!(r.satisfied);
        let at_max = compute_gamma(r.eta_max, 100, 1, 0.1, 1.0, 1.0).unwrap();
        assert!((at_max.gamma - 1.0).abs() < 1e-12);
        let doubled = compute_gamma(2e-5, 100, 1, 0.1, 1.0, 1.0).unwrap();
        assert!((doubled.gamma - 2.0 * r.gamma).abs() < 1e-15);
        assert!(matches!(compute_gamma(1e-5, 100, 1, 0.1, 1.0, 0.0), Err(Error::DegenerateEigengap(_))));
    }

    #[test]
    fn exact_power_iteration_ratio() {
        let s = diag(&[4.0, 1.0]);
        let mut cfg = AlectonConfig::new(2, 1, 0.01);
        cfg.k_steps = 50;
        cfg.renorm_every = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y0 = random_orthonormal(2, 1, &mut rng).unwrap();
        let out = angular_phase_from(&s, &cfg, None, y0.clone(), &mut rng).unwrap();
        let want = (1.04f64.powi(50) * y0.get(0, 0)) / (1.01f64.powi(50) * y0.get(1, 0));
        let got = out.y_hat.get(0, 0) / out.y_hat.get(1, 0);
        assert!((got / want - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_step_keeps_start() {
        let s = diag(&[4.0, 1.0, 0.5]);
        let mut cfg = AlectonConfig::new(3, 2, 0.0);
        cfg.k_steps = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y0 = random_orthonormal(3, 2, &mut rng).unwrap();
        let out = angular_phase_from(&s, &cfg, None, y0.clone(), &mut rng).unwrap();
        for (a, b) in out.y_hat.as_slice().iter().zip(y0.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let s = diag(&[1.0]);
        let mut cfg = AlectonConfig::new(1, 1, 1e10);
        cfg.k_steps = 100;
        cfg.renorm_every = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(angular_phase(&s, &cfg, None, &mut rng), Err(Error::Divergence { step: 10 })));
    }

    #[test]
    fn rank_condition_enforced() {
        let m = crate::sampling::TripletMatrix::from_entries(2, 2, [(0, 0, 1.0), (1, 1, 0.5)]).unwrap();
        let s = Sampler::new(SamplerKind::RectEntrywise, Arc::new(GroundTruth::RectTriplets(m))).unwrap();
        let cfg = AlectonConfig::new(4, 2, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(angular_phase(&s, &cfg, None, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn assemble_clips_negative() {
        let y = random_orthonormal(4, 2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let a = assemble(&y, &SmallSymmetric::diagonal(&[4.0, 1.0])).unwrap();
        assert_eq!(a.clipped, 0);
        for i in 0..4 {
            assert!((a.factor.get(i, 0) - 2.0 * y.get(i, 0)).abs() < 1e-12);
            assert!((a.factor.get(i, 1) - y.get(i, 1)).abs() < 1e-12);
        }
        let c = assemble(&y, &SmallSymmetric::diagonal(&[1.0, -0.01])).unwrap();
        assert_eq!(c.clipped, 1);
        for i in 0..4 {
            assert!(c.factor.get(i, 1).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_radial_is_projection() {
        let s = diag(&[3.0, 2.0, 1.0]);
        let y = random_orthonormal(3, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let r = radial_phase(&s, &y, 7, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let want: f64 = (0..3).map(|i| y.get(i, a) * [3.0, 2.0, 1.0][i] * y.get(i, b)).sum();
                assert!((r.get(a, b) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn infeasible_step_needs_force() {
        let t = GroundTruth::Spectral(SpectralTruth::diagonal(&[2.0, 1.0]).unwrap());
        let s = Sampler::new(SamplerKind::Entrywise, Arc::new(t)).unwrap();
        let mut cfg = AlectonConfig::new(2, 1, 1.0);
        cfg.k_steps = 5;
        cfg.l_steps = 5;
        assert!(matches!(recover(&s, &cfg, RecoverOptions::default()), Err(Error::Config(_))));
        let forced = RecoverOptions { force: true, ..Default::default() };
        assert!(recover(&s, &cfg, forced).unwrap().step_size.gamma > 1.0);
    }

    #[test]
    fn one_at_a_time_on_diagonal() {
        let s = diag(&[4.0, 1.0]);
        let mut cfg = AlectonConfig::new(2, 1, 0.05);
        cfg.k_steps = 2000;
        cfg.l_steps = 1;
        let out = one_at_a_time(&s, 2, &cfg, RecoverOptions::default()).unwrap();
        let est = out.estimate_dense(2);
        let want = [4.0, 0.0, 0.0, 1.0];
        for (a, b) in est.iter().zip(&want) {
            assert!((a - b).abs() < 1e-4, "{est:?}");
        }
        assert!(out.components[0][0].abs() > 1.99);
        let dense = s.truth().dense();
        for k in 0..=2 {
            let a = out.relative_residual(k, &dense);
            assert!((a - out.relative_residual_to(k, s.truth())).abs() < 1e-12);
        }
    }
}
