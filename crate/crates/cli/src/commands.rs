use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use tempfile::NamedTempFile;

use alecton::analysis::{
    divergence_demo, lower_bound_experiment, stuck_demo, write_zp_csv, zp_monte_carlo, LowerBoundSampler,
    StepSchedule,
};
use alecton::linalg::{random_orthonormal, TallMatrix, Vector};
use alecton::recovery::{
    compute_gamma, default_k_steps, one_at_a_time, recover, AlectonConfig, RecoverOptions, RecoveryResult,
};
use alecton::sampling::triplets::parse_triplets;
use alecton::sampling::{
    matrix_incoherence, GroundTruth, SampleSource, Sampler, SamplerKind, SpectralTruth, SubspaceTruth, TripletMatrix,
};
use alecton::seed::{derive_seed, stream_rng};
use alecton::Error;

use crate::truth_file::{format_truth, parse_truth};
use crate::{usage, CliError, Coherence, Command, DemoKind, IngestArgs, RunArgs, SamplerArg, ScheduleArg, SynthArgs, ZpArgs};

type Header = Vec<(String, String)>;

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Oaat(a) => cmd_oaat(a, out),
        Command::Zp(a) => cmd_zp(a, out),
        Command::Demo(a) => cmd_demo(&a.kind, out),
        Command::Ingest(a) => cmd_ingest(a, out),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn check_output_path(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        return Err(usage(format!("output path {} is a directory", path.display())));
    }
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(usage(format!("output directory {} does not exist", parent.display())));
    }
    Ok(())
}

/// Writes to a temporary file beside `path`, then renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(parent).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).and_then(|_| tmp.flush()).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn kv(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn format_factor(y: &TallMatrix) -> String {
    let mut s = String::new();
    for i in 0..y.nrows() {
        let row: Vec<String> = y.row(i).iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.rank == 0 || a.rank > a.n {
        return Err(usage(format!("need 1 <= rank <= n, got n={}, rank={}", a.n, a.rank)));
    }
    let eigenvalues = a.eigenvalues.clone().unwrap_or_else(|| (1..=a.rank).rev().map(|k| k as f64).collect());
    if eigenvalues.len() != a.rank {
        return Err(usage(format!("{} eigenvalues given for rank {}", eigenvalues.len(), a.rank)));
    }
    if eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
        return Err(usage("eigenvalues must be positive and descending"));
    }
    check_output_path(&a.out)?;
    let u = match a.coherence {
        Coherence::RandomOrthogonal => random_orthonormal(a.n, a.rank, &mut stream_rng(a.seed, 0))?,
        Coherence::BasisAligned => {
            let cols: Vec<Vector> = (0..a.rank).map(|k| Vector::basis(a.n, k)).collect();
            TallMatrix::from_columns(&cols)?
        }
    };
    let truth = SpectralTruth::new(eigenvalues, u)?;
    write_atomic(&a.out, format_truth(&truth).as_bytes())?;
    say(out, format_args!("n={} rank={} incoherence={:.6}", a.n, a.rank, matrix_incoherence(&truth)))
}

struct Setup {
    sampler: Sampler,
    triplets: Option<TripletMatrix>,
    config: AlectonConfig,
    options: RecoverOptions,
    header: Header,
}

fn sampler_kind(arg: SamplerArg, m_keep: usize) -> SamplerKind {
    match arg {
        SamplerArg::Exact => SamplerKind::Exact,
        SamplerArg::Entrywise => SamplerKind::Entrywise,
        SamplerArg::Rect => SamplerKind::RectEntrywise,
        SamplerArg::Trace => SamplerKind::Trace,
        SamplerArg::TraceSym => SamplerKind::TraceSymmetric,
        SamplerArg::Subspace => SamplerKind::Subspace { m_keep },
        SamplerArg::SubspaceSplit => SamplerKind::SubspaceSplit { m_keep },
    }
}

/// Largest step size with `γ ≤ 1` for each listed `(p, q)` target; the
/// smallest of them.
fn eta_for_targets(sampler: &Sampler, targets: &[(usize, usize)], epsilon: f64) -> Result<f64, CliError> {
    let sigma_a_sq = sampler.variance()?.params.sigma_a_sq;
    let mut eta = f64::INFINITY;
    for &(p, q) in targets {
        let delta = sampler.truth().eigengap(q)?;
        eta = eta.min(compute_gamma(1.0, sampler.dim(), p, epsilon, sigma_a_sq, delta)?.eta_max);
    }
    Ok(eta)
}

/// Resolves flags, loads inputs and validates the configuration; nothing
/// expensive runs and nothing is written here.
fn prepare(a: &RunArgs, command: &str) -> Result<Setup, CliError> {
    check_output_path(&a.out)?;
    if let Some(f) = &a.factor_out {
        check_output_path(f)?;
    }
    let oaat = command == "oaat";
    let arg = a.sampler.unwrap_or(if a.triplets.is_some() { SamplerArg::Rect } else { SamplerArg::Entrywise });
    let mut header: Header = vec![kv("command", command)];
    let (truth, triplets) = match (&a.truth, &a.triplets) {
        (Some(path), None) => {
            if arg == SamplerArg::Rect {
                return Err(usage("--sampler rect needs --triplets"));
            }
            let spectral = parse_truth(open_input(path)?)?;
            header.push(kv("truth", path.display()));
            let truth = match arg {
                SamplerArg::Subspace | SamplerArg::SubspaceSplit => {
                    GroundTruth::ProjectionSubspace(SubspaceTruth::new(spectral.eigenvectors().clone())?)
                }
                _ => GroundTruth::Spectral(spectral),
            };
            (truth, None)
        }
        (None, Some(path)) => {
            let shape = match (a.rows, a.cols) {
                (Some(m), Some(n)) => Some((m, n)),
                (None, None) => None,
                _ => return Err(usage("give both --rows and --cols, or neither")),
            };
            let m = parse_triplets(open_input(path)?, shape)?;
            header.push(kv("triplets", path.display()));
            header.push(kv("rows", m.rows()));
            header.push(kv("cols", m.cols()));
            (GroundTruth::RectTriplets(m.clone()), Some(m))
        }
        _ => return Err(usage("give exactly one of --truth or --triplets")),
    };
    let n = truth.dim();
    let m_keep = a.m_keep.unwrap_or(n);
    let kind = sampler_kind(arg, m_keep);
    let sampler = Sampler::new(kind, Arc::new(truth))
        .and_then(|s| s.wrap_noisy(a.noise_add, a.noise_mul))
        .map_err(usage)?;

    let (p, q) = if oaat { (1, 1) } else { (a.p, a.q.unwrap_or(a.p)) };
    if oaat && a.q.is_some() {
        return Err(usage("oaat recovers one component at a time; --q does not apply"));
    }
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        return Err(usage(format!("--epsilon must lie in (0, 1), got {}", a.epsilon)));
    }
    if a.p == 0 || a.p > n || q < p || q > n {
        return Err(usage(format!("need 1 <= p <= q <= n, got p={}, q={q}, n={n}", a.p)));
    }
    // per deflation stage the target is the next single eigenvector
    let targets: Vec<(usize, usize)> = if oaat { (1..=a.p).map(|k| (1, k)).collect() } else { vec![(p, q)] };
    let eta_max = eta_for_targets(&sampler, &targets, a.epsilon)?;
    let eta = match a.eta {
        Some(e) if e.is_finite() && e > 0.0 => e,
        Some(e) => return Err(usage(format!("--eta must be positive and finite, got {e}"))),
        None if eta_max.is_finite() => eta_max,
        None => return Err(usage(format!("--sampler {} has no variance bound; give --eta", kind.name()))),
    };
    let gamma = if eta_max.is_finite() { eta / eta_max } else { 0.0 };
    if gamma > 1.0 + 1e-12 && !a.force {
        return Err(usage(format!(
            "step size infeasible: gamma = {gamma:.6e} > 1 (eta_max = {eta_max:.6e}); pass --force to run anyway"
        )));
    }

    let k_steps = a.k_steps.unwrap_or_else(|| default_k_steps(n, a.epsilon));
    let config = AlectonConfig {
        n,
        p,
        q,
        epsilon: a.epsilon,
        eta,
        k_steps,
        l_steps: a.l_steps,
        seed: a.seed,
        renorm_every: a.renorm_every,
        trace_every: a.trace_every.unwrap_or((k_steps / 1000).max(1)),
    };
    config.validate().map_err(usage)?;
    // feasibility is settled above, up to rounding in eta_max
    let options = RecoverOptions {
        force: true,
        angular_only: a.angular_only,
        monitor: true,
        stop_on_success: a.stop_on_success,
    };

    header.extend([
        kv("sampler", kind.name()),
        kv("n", n),
        kv(if oaat { "components" } else { "p" }, a.p),
        kv("q", if oaat { 1 } else { q }),
        kv("epsilon", a.epsilon),
        kv("eta", eta),
        kv("eta_max", eta_max),
        kv("gamma", gamma),
        kv("k_steps", k_steps),
        kv("l_steps", a.l_steps),
        kv("seed", a.seed),
        kv("renorm_every", a.renorm_every),
        kv("trace_every", config.trace_every),
        kv("noise_add", a.noise_add),
        kv("noise_mul", a.noise_mul),
        kv("angular_only", a.angular_only),
        kv("force", a.force),
        kv("stop_on_success", a.stop_on_success),
    ]);
    if matches!(kind, SamplerKind::Subspace { .. } | SamplerKind::SubspaceSplit { .. }) {
        header.push(kv("m_keep", m_keep));
    }
    Ok(Setup { sampler, triplets, config, options, header })
}

fn summary(run: &RecoveryResult, angular_only: bool) -> String {
    let last = run.trace.last();
    let mut s = format!(
        "converged={} steps={} rho_final={:.6} wall_ms={:.3}",
        last.is_some_and(|r| r.succeeded),
        run.steps,
        last.map_or(f64::NAN, |r| r.rho),
        run.wall_ms
    );
    if let (false, Some(r)) = (angular_only, &run.r_bar) {
        s.push_str(&format!(" clipped={} r_bar_trace={:.6e}", run.clipped, r.trace()));
    }
    s
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let setup = prepare(a, "run")?;
    let run = recover(&setup.sampler, &setup.config, setup.options)?;
    let mut csv = Vec::new();
    run.trace.write_csv(&mut csv, &setup.header).map_err(|e| CliError::io(&a.out, e))?;
    write_atomic(&a.out, &csv)?;
    if let Some(f) = &a.factor_out {
        write_atomic(f, format_factor(&run.factor).as_bytes())?;
    }
    say(out, format_args!("{}", summary(&run, a.angular_only)))
}

fn cmd_oaat(a: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let setup = prepare(a, "oaat")?;
    let result = one_at_a_time(&setup.sampler, a.p, &setup.config, setup.options)?;
    let mut csv = String::new();
    for (k, v) in &setup.header {
        csv.push_str(&format!("# {k}={v}\n"));
    }
    csv.push_str("component,steps,residual_fro,wall_ms\n");
    for (i, run) in result.runs.iter().enumerate() {
        let residual = match &setup.triplets {
            Some(m) => result.triplet_rmse(i + 1, m),
            None => result.relative_residual_to(i + 1, setup.sampler.truth()),
        };
        csv.push_str(&format!("{},{},{:.15e},{:.3}\n", i + 1, run.steps, residual, run.wall_ms));
    }
    write_atomic(&a.out, csv.as_bytes())?;
    if let Some(f) = &a.factor_out {
        write_atomic(f, format_factor(&TallMatrix::from_columns(&result.components)?).as_bytes())?;
    }
    for run in &result.runs {
        say(out, format_args!("{}", summary(run, a.angular_only)))?;
    }
    Ok(())
}

fn cmd_zp(a: &ZpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.p.iter().any(|&p| p == 0 || p > alecton::linalg::MAX_SMALL_DIM) {
        return Err(usage("each --p must lie in 1..=64"));
    }
    if a.gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(usage("each --gamma must be finite and >= 0"));
    }
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    if let Some(path) = &a.out {
        check_output_path(path)?;
    }
    let grid: Vec<(usize, f64)> = a.p.iter().flat_map(|&p| a.gamma.iter().map(move |&g| (p, g))).collect();
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(p, g))| zp_monte_carlo(p, g, a.samples, derive_seed(a.seed, i as u64)))
        .collect::<Result<Vec<_>, Error>>()?;
    let header = vec![kv("command", "zp"), kv("samples", a.samples), kv("seed", a.seed)];
    let mut csv = Vec::new();
    write_zp_csv(&mut csv, &rows, &header).map_err(|e| CliError::io(Path::new("<zp>"), e))?;
    match &a.out {
        Some(path) => write_atomic(path, &csv),
        None => out.write_all(&csv).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn schedules(arg: ScheduleArg, eta: f64) -> Vec<StepSchedule> {
    match arg {
        ScheduleArg::Constant => vec![StepSchedule::Constant(eta)],
        ScheduleArg::Harmonic => vec![StepSchedule::Harmonic(eta)],
        ScheduleArg::Aggressive => vec![StepSchedule::Aggressive(eta)],
        ScheduleArg::All => {
            vec![StepSchedule::Constant(eta), StepSchedule::Harmonic(eta), StepSchedule::Aggressive(eta)]
        }
    }
}

fn verdict(out: &mut dyn Write, ok: bool, what: &str) -> Result<(), CliError> {
    say(out, format_args!("{}", if ok { "PASS" } else { "FAIL" }))?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Check(format!("{what} check failed")))
    }
}

fn cmd_demo(kind: &DemoKind, out: &mut dyn Write) -> Result<(), CliError> {
    match *kind {
        DemoKind::Diverge { alpha, c, x0, max_steps } => {
            let r = divergence_demo(alpha, c, x0, max_steps).map_err(usage)?;
            say(
                out,
                format_args!(
                    "x1={:e} overflow_step={} bound_held={}",
                    r.trace.get(1).copied().unwrap_or(f64::NAN),
                    r.overflow_step,
                    r.bound_held
                ),
            )?;
            verdict(out, r.bound_held, "divergence")
        }
        DemoKind::Stuck { steps, eta, schedule, y2 } => {
            if y2 == 0.0 {
                return Err(usage("--y2 must be nonzero"));
            }
            let mut ok = true;
            for s in schedules(schedule, eta) {
                let r = stuck_demo(s, [0.0, y2], steps);
                let max_e1 = r.first_coordinate.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let pass = r.first_coordinate_stayed_zero && r.distance_to_optimum >= 3.0;
                say(
                    out,
                    format_args!(
                        "schedule={} max_abs_e1={max_e1:e} final_y=({:.6},{:.6}) distance={:.6}",
                        s.name(),
                        r.final_y[0],
                        r.final_y[1],
                        r.distance_to_optimum
                    ),
                )?;
                ok &= pass;
            }
            verdict(out, ok, "stuck point")
        }
        DemoKind::Lowerbound { n, k_steps, trials, zeta, eta, schedule, seed } => {
            if n < 2 {
                return Err(usage("--n must be at least 2"));
            }
            let mut eigenvalues = vec![0.0; n];
            eigenvalues[0] = 1.0;
            eigenvalues[1] = 0.5;
            let sampler = LowerBoundSampler::new(eigenvalues, 1, zeta).map_err(usage)?;
            if !(eta.is_finite() && eta > 0.0) {
                return Err(usage("--eta must be positive"));
            }
            let mut ok = true;
            for (i, s) in schedules(schedule, eta).into_iter().enumerate() {
                let r = lower_bound_experiment(&sampler, k_steps, s, trials, derive_seed(seed, i as u64))?;
                say(
                    out,
                    format_args!(
                        "schedule={} mean_rho={:.6e} std_err={:.3e} floor={:.6e} sigma_sq={:.6e} c={:.6}",
                        s.name(),
                        r.mean_rho,
                        r.std_err,
                        r.floor,
                        r.sigma_sq,
                        r.c_bound
                    ),
                )?;
                ok &= r.passed;
            }
            verdict(out, ok, "lower bound")
        }
    }
}

fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let shape = match (a.rows, a.cols) {
        (Some(m), Some(n)) => Some((m, n)),
        (None, None) => None,
        _ => return Err(usage("give both --rows and --cols, or neither")),
    };
    let m = match parse_triplets(open_input(&a.path)?, shape) {
        Ok(m) => m,
        Err(Error::Parse { line: 0, .. }) => {
            say(out, format_args!("count=0"))?;
            return Err(CliError::Check("no entries: the matrix is degenerate".into()));
        }
        Err(e) => return Err(e.into()),
    };
    say(
        out,
        format_args!(
            "m={} n={} count={} xi={:.6} fro={:.6}",
            m.rows(),
            m.cols(),
            m.count(),
            m.entry_bound(),
            m.frobenius_sq().sqrt()
        ),
    )
}
