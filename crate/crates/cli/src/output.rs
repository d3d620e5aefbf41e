//! Deterministic numeric formatting and the simulation CSV schema.

/// Fixed column order for every simulation row.
pub const CSV_HEADER: &str = "experiment,policy,N,horizon,warmup,seed,replications,\
                              mean_aoi,stderr,lower_bound,wallclock_seconds";

/// Format with nine significant digits. Plain decimal notation inside a
/// plot-friendly magnitude window, scientific outside it. The output is a
/// pure function of the value, so repeated runs emit identical bytes.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=14).contains(&exp) {
        format!("{x:.8e}")
    } else {
        let prec = (8 - exp).max(0) as usize;
        format!("{x:.prec$}")
    }
}

/// One simulation result row. `wallclock_seconds` stays empty unless timing
/// was explicitly requested, keeping default output byte-reproducible.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub experiment: String,
    pub policy: &'static str,
    pub n: usize,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub replications: u32,
    pub mean_aoi: f64,
    pub stderr: f64,
    pub lower_bound: f64,
    pub wallclock_seconds: Option<f64>,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        let wallclock =
            self.wallclock_seconds.map(fmt_sig).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.policy,
            self.n,
            self.horizon,
            self.warmup,
            self.seed,
            self.replications,
            fmt_sig(self.mean_aoi),
            fmt_sig(self.stderr),
            fmt_sig(self.lower_bound),
            wallclock
        )
    }
}
