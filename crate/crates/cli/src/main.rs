//! `aoi-sched`: age-of-information scheduling toolkit for slotted broadcast
//! networks — closed-form index inspection, exact single- and two-client
//! solvers, structural verification, and a replicated discrete-event
//! simulator with CSV output.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use aoi_cli::config::{parse_config, parse_success_probs, SimulationSpec};
use aoi_cli::output::{fmt_sig, CsvRow, CSV_HEADER};
use aoi_cli::preset::{fig2_sweep, fig3_sweep, PRESET_POLICIES};
use aoi_cli::AppError;
use aoi_core::{
    aoi_lower_bound, approx_whittle_index, index_breakdown, numeric_whittle, replicate,
    solve_decoupled, solve_joint_optimal, verify_structure, Action, ClientParams,
    DecoupledProblem, IndexBranch, JointProblem, PolicyKind, PolicySpec, SimConfig, TieRule,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aoi-sched",
    version,
    about = "Age-of-information broadcast scheduling: index policies, exact \
             small-network solvers, structural verification, and simulation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the closed-form scheduling index at one state
    Index(IndexArgs),
    /// Solve the single-client subsidy problem; dump summary and thresholds
    Solve(SolveArgs),
    /// Machine-check the structural properties of solved subsidy problems
    Verify(VerifyArgs),
    /// Bisect the numeric index at one state against the exact solver
    Whittle(WhittleArgs),
    /// Simulate the policies described by a config file; emit CSV
    Simulate(SimulateArgs),
    /// Run a built-in experiment sweep; emit CSV
    #[command(subcommand)]
    Experiment(PresetCmd),
    /// Print the average-AoI lower bound for a channel profile
    Bound(BoundArgs),
}

#[derive(Args)]
struct IndexArgs {
    /// Packet age (>= 1)
    #[arg(long)]
    a: u64,
    /// Freshness gap (AoI minus packet age)
    #[arg(long)]
    d: u64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    p: f64,
    /// Passivity subsidy W
    #[arg(long)]
    w: f64,
    /// Age-grid truncation (give both bounds or neither)
    #[arg(long)]
    a_max: Option<u32>,
    /// Gap-grid truncation
    #[arg(long)]
    d_max: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: u64,
    /// Also dump the full bias table (a,d,bias,action)
    #[arg(long)]
    dump_bias: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Verify a single instance (give all of --lambda/--p/--w, or none for
    /// the built-in 36-point grid)
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    /// Override the verification grid size (give both bounds or neither)
    #[arg(long)]
    a_max: Option<u32>,
    #[arg(long)]
    d_max: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Residual tolerance for the exact-identity checks
    #[arg(long, default_value_t = 1e-6)]
    check_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: u64,
}

#[derive(Args)]
struct WhittleArgs {
    #[arg(long)]
    a: u32,
    #[arg(long)]
    d: u32,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    p: f64,
    /// Upper end of the subsidy bracket (default: 3x the closed form + 16)
    #[arg(long)]
    w_hi: Option<f64>,
    /// Bisection width at which to stop
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config file (flat key = value text)
    #[arg(long)]
    config: PathBuf,
    /// Fill the wallclock_seconds column (breaks byte-reproducibility)
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum PresetCmd {
    /// Size sweep: N clients, arrival rate 10/(N+10), channels half 0.9 /
    /// half 0.1, horizon 6N*10^4 slots
    Fig2 {
        /// Multiply horizons (and thin the default N grid) by this factor
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Explicit N list (comma-separated, even values)
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        replications: u32,
        #[arg(long)]
        timing: bool,
    },
    /// Channel sweep: 40 clients at arrival rate 0.2, twenty fixed at
    /// p = 0.1, twenty sweeping p, horizon 3*10^6 slots
    Fig3 {
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Explicit sweep values for the variable half (comma-separated)
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        replications: u32,
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Args)]
struct BoundArgs {
    /// Success probabilities, e.g. `0.9,0.1` or grouped `5x0.9,5x0.1`
    #[arg(long)]
    p: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout().lock();
    let mut out = std::io::BufWriter::new(stdout);
    let result = run(cli, &mut out).and_then(|()| Ok(out.flush()?));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away (e.g. piped into `head`): stop quietly
        Err(AppError::Pipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), AppError> {
    init_threads()?;
    match cli.cmd {
        Cmd::Index(args) => cmd_index(args, out),
        Cmd::Solve(args) => cmd_solve(args, out),
        Cmd::Verify(args) => cmd_verify(args, out),
        Cmd::Whittle(args) => cmd_whittle(args, out),
        Cmd::Simulate(args) => cmd_simulate(args, out),
        Cmd::Experiment(preset) => cmd_experiment(preset, out),
        Cmd::Bound(args) => cmd_bound(args, out),
    }
}

fn init_threads() -> Result<(), AppError> {
    match std::env::var("AOI_SCHED_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                AppError::Usage(format!(
                    "AOI_SCHED_THREADS must be a positive integer, got `{raw}`"
                ))
            })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| AppError::Usage(format!("thread pool setup failed: {e}")))
        }
    }
}

fn checked_params(lambda: f64, p: f64) -> Result<ClientParams, AppError> {
    Ok(ClientParams::new(lambda, p)?)
}

fn checked_subsidy(w: f64) -> Result<f64, AppError> {
    if w.is_finite() && w >= 0.0 {
        Ok(w)
    } else {
        Err(AppError::Usage(format!("subsidy must be finite and >= 0, got {w}")))
    }
}

fn checked_tol(tol: f64) -> Result<f64, AppError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(AppError::Usage(format!("tolerance must be positive, got {tol}")))
    }
}

fn cmd_index(args: IndexArgs, out: &mut dyn Write) -> Result<(), AppError> {
    if args.a == 0 {
        return Err(AppError::Usage("packet age must be at least 1".into()));
    }
    let params = checked_params(args.lambda, args.p)?;
    let b = index_breakdown(args.a, args.d, params);
    writeln!(out, "state: a={} d={} lambda={} p={}", args.a, args.d, args.lambda, args.p)?;
    writeln!(out, "index = {}", fmt_sig(b.index))?;
    let branch = match b.branch {
        IndexBranch::Quadratic => "quadratic",
        IndexBranch::Linear => "linear",
    };
    writeln!(out, "branch = {branch}")?;
    writeln!(out, "x = {}", fmt_sig(b.x))?;
    writeln!(out, "quadratic_value = {}", fmt_sig(b.quadratic_value))?;
    writeln!(out, "linear_value = {}", fmt_sig(b.linear_value))?;
    writeln!(
        out,
        "quadratic_applies: d*Delta/a = {} >= (a-1)/2 + Delta = {} -> {}",
        fmt_sig(b.condition_lhs),
        fmt_sig(b.condition_rhs),
        b.condition_lhs >= b.condition_rhs
    )?;
    Ok(())
}

fn pick_problem(
    params: ClientParams,
    w: f64,
    a_max: Option<u32>,
    d_max: Option<u32>,
    verification: bool,
) -> Result<DecoupledProblem, AppError> {
    match (a_max, d_max) {
        // explicit verification grids skip the comfort check so deliberately
        // tiny truncations surface as saturation diagnostics rather than
        // constructor rejections
        (Some(a), Some(d)) if verification => Ok(DecoupledProblem::unchecked(params, w, a, d)),
        (Some(a), Some(d)) => Ok(DecoupledProblem::new(params, w, a, d)?),
        // default to a grid whose interior is trustworthy, not merely
        // solvable: dumped thresholds and bias values are read by humans
        (None, None) => Ok(DecoupledProblem::sized_for_verification(params, w)),
        _ => Err(AppError::Usage("give both --a-max and --d-max, or neither".into())),
    }
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write) -> Result<(), AppError> {
    let params = checked_params(args.lambda, args.p)?;
    let w = checked_subsidy(args.w)?;
    let tol = checked_tol(args.tol)?;
    let prob = pick_problem(params, w, args.a_max, args.d_max, false)?;
    let sol = solve_decoupled(&prob, tol, args.max_iter)?;

    writeln!(out, "lambda,p,subsidy,a_max,d_max,avg_cost,span,iterations,saturated")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        args.lambda,
        args.p,
        args.w,
        prob.a_max(),
        prob.d_max(),
        fmt_sig(sol.avg_cost()),
        fmt_sig(sol.span()),
        sol.iterations(),
        sol.saturated()
    )?;
    writeln!(out)?;
    writeln!(out, "a,threshold")?;
    for a in 1..=prob.a_max() {
        let t = sol.threshold(a);
        if t > prob.d_max() {
            // never active anywhere on this row of the grid
            writeln!(out, "{a},")?;
        } else {
            writeln!(out, "{a},{t}")?;
        }
    }
    if args.dump_bias {
        writeln!(out)?;
        writeln!(out, "a,d,bias,action")?;
        for a in 1..=prob.a_max() {
            for d in 0..=prob.d_max() {
                let act = match sol.action(a, d) {
                    Action::Idle => "idle",
                    Action::Update => "update",
                };
                writeln!(out, "{a},{d},{},{act}", fmt_sig(sol.bias(a, d)))?;
            }
        }
    }
    Ok(())
}

/// The default verification grid: every combination of these arrival rates,
/// success probabilities, and subsidies.
const VERIFY_LAMBDAS: [f64; 4] = [0.2, 0.5, 0.8, 1.0];
const VERIFY_PS: [f64; 3] = [0.3, 0.7, 1.0];
const VERIFY_WS: [f64; 3] = [5.0, 20.0, 50.0];

fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> Result<(), AppError> {
    let tol = checked_tol(args.tol)?;
    let check_tol = checked_tol(args.check_tol)?;
    let instances: Vec<(f64, f64, f64)> = match (args.lambda, args.p, args.w) {
        (Some(l), Some(p), Some(w)) => vec![(l, p, w)],
        (None, None, None) => {
            let mut grid = Vec::new();
            for &l in &VERIFY_LAMBDAS {
                for &p in &VERIFY_PS {
                    for &w in &VERIFY_WS {
                        grid.push((l, p, w));
                    }
                }
            }
            grid
        }
        _ => {
            return Err(AppError::Usage(
                "give all of --lambda, --p and --w for a single instance, or none \
                 for the default grid"
                    .into(),
            ))
        }
    };

    writeln!(out, "lambda,p,w,check,residual,checked,pass")?;
    let mut failures = 0usize;
    let mut total = 0usize;
    for (l, p, w) in instances {
        let params = checked_params(l, p)?;
        let w = checked_subsidy(w)?;
        let prob = pick_problem(params, w, args.a_max, args.d_max, true)?;
        let sol = solve_decoupled(&prob, tol, args.max_iter)?;
        sol.check_saturation()?;
        let report = verify_structure(&sol, check_tol);
        for (name, check) in report.rows() {
            writeln!(
                out,
                "{l},{p},{w},{name},{},{},{}",
                fmt_sig(check.residual),
                check.checked,
                check.pass
            )?;
            total += 1;
            if !check.pass {
                failures += 1;
            }
        }
    }
    writeln!(out, "# checks={total} failed={failures}")?;
    if failures > 0 {
        out.flush()?;
        return Err(AppError::ChecksFailed(format!(
            "{failures} of {total} structural checks failed"
        )));
    }
    Ok(())
}

fn cmd_whittle(args: WhittleArgs, out: &mut dyn Write) -> Result<(), AppError> {
    if args.a == 0 {
        return Err(AppError::Usage("packet age must be at least 1".into()));
    }
    let params = checked_params(args.lambda, args.p)?;
    let tol = checked_tol(args.tol)?;
    let approx = approx_whittle_index(args.a as u64, args.d as u64, params).get();
    let w_hi = match args.w_hi {
        Some(w) if w.is_finite() && w > 0.0 => w,
        Some(w) => return Err(AppError::Usage(format!("--w-hi must be positive, got {w}"))),
        None => 3.0 * approx + 16.0,
    };
    let numeric = numeric_whittle(args.a, args.d, params, w_hi, tol)?;
    writeln!(out, "state: a={} d={} lambda={} p={}", args.a, args.d, args.lambda, args.p)?;
    writeln!(out, "approx_index = {}", fmt_sig(approx))?;
    writeln!(out, "numeric_whittle = {}", fmt_sig(numeric))?;
    writeln!(out, "approx_minus_numeric = {}", fmt_sig(approx - numeric))?;
    Ok(())
}

fn build_policy(
    kind: PolicyKind,
    tie: TieRule,
    clients: &[ClientParams],
    age_cap: u32,
) -> Result<PolicySpec, AppError> {
    Ok(match kind {
        PolicyKind::ApproxIndex => PolicySpec::ApproxIndex { tie },
        PolicyKind::ArrivalAware => PolicySpec::ArrivalAware { tie },
        PolicyKind::MaxAge => PolicySpec::MaxAge,
        PolicyKind::RoundRobin => PolicySpec::RoundRobin,
        PolicyKind::Random => PolicySpec::Random,
        PolicyKind::OptimalTable => {
            let joint = JointProblem::new(clients.to_vec(), age_cap)?;
            let sol = solve_joint_optimal(&joint, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            sol.check_saturation()?;
            PolicySpec::OptimalTable { table: Arc::new(sol) }
        }
    })
}

fn run_spec(
    spec: &SimulationSpec,
    timing: bool,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    let ps: Vec<f64> = spec.clients.iter().map(|c| c.success_prob()).collect();
    let lower_bound = aoi_lower_bound(&ps)?;
    for &kind in &spec.policies {
        let policy = build_policy(kind, spec.tie, &spec.clients, spec.age_cap)?;
        let cfg = match spec.warmup {
            Some(w) => {
                SimConfig::with_warmup(spec.clients.clone(), spec.horizon, w, spec.seed, policy)?
            }
            None => SimConfig::new(spec.clients.clone(), spec.horizon, spec.seed, policy)?,
        }
        .replications(spec.replications)?;
        let started = Instant::now();
        let res = replicate(&cfg);
        let row = CsvRow {
            experiment: spec.experiment.clone(),
            policy: kind.name(),
            n: spec.clients.len(),
            horizon: cfg.horizon(),
            warmup: cfg.warmup(),
            seed: spec.seed,
            replications: spec.replications,
            mean_aoi: res.replication_mean,
            stderr: res.replication_stderr,
            lower_bound,
            wallclock_seconds: timing.then(|| started.elapsed().as_secs_f64()),
        };
        writeln!(out, "{}", row.to_line())?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), AppError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        AppError::Usage(format!("cannot read config `{}`: {e}", args.config.display()))
    })?;
    let spec = parse_config(&text)
        .map_err(|e| AppError::Usage(format!("config `{}`: {e}", args.config.display())))?;
    writeln!(out, "{CSV_HEADER}")?;
    run_spec(&spec, args.timing, out)
}

fn cmd_experiment(preset: PresetCmd, out: &mut dyn Write) -> Result<(), AppError> {
    let (points, seed, replications, timing) = match preset {
        PresetCmd::Fig2 { scale, n, seed, replications, timing } => {
            (fig2_sweep(scale, n.as_deref()).map_err(AppError::Usage)?, seed, replications, timing)
        }
        PresetCmd::Fig3 { scale, p_values, seed, replications, timing } => (
            fig3_sweep(scale, p_values.as_deref()).map_err(AppError::Usage)?,
            seed,
            replications,
            timing,
        ),
    };
    writeln!(out, "{CSV_HEADER}")?;
    for point in points {
        let spec = SimulationSpec {
            experiment: point.label,
            clients: point.clients,
            horizon: point.horizon,
            warmup: None,
            seed,
            replications,
            policies: PRESET_POLICIES.to_vec(),
            tie: TieRule::LowestIndex,
            age_cap: 16,
        };
        run_spec(&spec, timing, out)?;
    }
    Ok(())
}

fn cmd_bound(args: BoundArgs, out: &mut dyn Write) -> Result<(), AppError> {
    let ps = parse_success_probs(&args.p).map_err(AppError::Usage)?;
    writeln!(out, "N = {}", ps.len())?;
    writeln!(out, "L_B = {}", fmt_sig(aoi_lower_bound(&ps)?))?;
    Ok(())
}
