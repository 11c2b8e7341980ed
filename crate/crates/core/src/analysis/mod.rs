//! Experiments that check the theory: `Z_p`, the failure-probability bound,
//! the divergence and stuck-point examples, and the rate lower bound.

mod appendix;
mod bound;
mod zp;

use std::io::{self, Write};

pub use appendix::{
    divergence_demo, lower_bound_experiment, stuck_demo, DivergenceReport, LowerBoundReport, LowerBoundSampler,
    StepSchedule, StuckReport,
};
pub use bound::{
    empirical_failure_rate, failure_bound, wilson_interval, BoundInputs, BoundReport, FailureReport, TrialOutcome,
};
pub use zp::{erf, erfc, erfcx, z1_closed_form, z1_quadrature, zp_monte_carlo, zp_sample_value, ZpEstimate};

/// `gamma,p,n_samples,value,std_err` rows, with a `closed_form` column when
/// any row has `p = 1` (blank for other rows).
pub fn write_zp_csv<W: Write>(mut out: W, rows: &[ZpEstimate], header: &[(String, String)]) -> io::Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    let closed = rows.iter().any(|r| r.p == 1);
    write!(out, "gamma,p,n_samples,value,std_err")?;
    if closed {
        write!(out, ",closed_form")?;
    }
    writeln!(out)?;
    for r in rows {
        write!(out, "{:.15e},{},{},{:.15e},{:.15e}", r.gamma, r.p, r.num_samples, r.value, r.std_err)?;
        if closed {
            match (r.p, z1_closed_form(r.gamma)) {
                (1, Ok(z)) => write!(out, ",{z:.15e}")?,
                _ => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
