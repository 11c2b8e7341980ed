use std::io::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub rho: f64,
    pub tau: Option<f64>,
    pub succeeded: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; steps must strictly increase.
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.step > last.step, "trace steps must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// First recorded step at which the success condition held.
    pub fn first_success(&self) -> Option<usize> {
        self.records.iter().find(|r| r.succeeded).map(|r| r.step)
    }

    /// `step,rho,tau,wall_ms` rows preceded by `# key=value` lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[(String, String)]) -> io::Result<()> {
        for (k, v) in header {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "step,rho,tau,wall_ms")?;
        for r in &self.records {
            let tau = r.tau.map(|t| format!("{t:.15e}")).unwrap_or_default();
            writeln!(out, "{},{:.15e},{},{:.3}", r.step, r.rho, tau, r.wall_ms)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = ConvergenceTrace::new();
        t.push(TraceRecord { step: 0, rho: 0.25, tau: None, succeeded: false, wall_ms: 0.0 });
        t.push(TraceRecord { step: 10, rho: 0.95, tau: Some(0.5), succeeded: true, wall_ms: 1.5 });
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &[("seed".into(), "3".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=3");
        assert_eq!(lines[1], "step,rho,tau,wall_ms");
        assert_eq!(lines[2], "0,2.500000000000000e-1,,0.000");
        assert_eq!(lines[3], "10,9.500000000000000e-1,5.000000000000000e-1,1.500");
        assert_eq!(t.first_success(), Some(10));
    }

    #[test]
    #[should_panic]
    fn rejects_non_increasing_steps() {
        let mut t = ConvergenceTrace::new();
        let r = TraceRecord { step: 3, rho: 0.0, tau: None, succeeded: false, wall_ms: 0.0 };
        t.push(r);
        t.push(r);
    }
}
