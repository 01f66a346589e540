use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fracbin::arbitrage::{make_schedules, run_path, ExperimentRow, Schedules, EXPERIMENT_HEADER};
use fracbin::diagnostics::{enumeration_suite, run_sweep, verify, McConfig};
use fracbin::kernel::{
    history_variance_limit, load_or_build, standard_c_h, theta_limit, CacheOutcome, KernelTable, ModelParams,
    QuadratureConfig,
};
use fracbin::market::simulate_batch;
use fracbin::nlist::parse_n_list;
use fracbin::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Largest discrepancy tolerated by `enumerate`.
const ENUMERATION_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "fracbin", version, about = "Fractional binary market laboratory")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Hurst exponent in (1/2, 1).
    #[arg(long = "H")]
    hurst: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Kernel normalisation constant.
    #[arg(long = "cH")]
    c_h: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    #[arg(long, default_value_t = 64)]
    nodes_per_panel: u32,
    #[arg(long, default_value_t = 1024)]
    max_panels: u32,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    abs_tol: f64,
    /// Kernel cache directory.
    #[arg(long, env = "FRACBIN_CACHE_DIR", default_value = ".fracbin-cache")]
    cache_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct StrategyArgs {
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long = "eps-mult", default_value_t = 1.0)]
    eps_multiplier: f64,
    #[arg(long, default_value_t = 1e-10)]
    tail_tol: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or load the kernel table.
    Table {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "N")]
        n: usize,
    },
    /// Print the limit constants and schedules as JSON.
    Constants {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long = "N")]
        n: usize,
    },
    /// Write simulated paths as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 10)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "fracbin-out")]
        out: PathBuf,
    },
    /// Run the strategy pipeline and write the experiment CSV.
    Arbitrage {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the transaction cost schedule by a fixed value.
        #[arg(long)]
        lambda: Option<f64>,
        /// Also dump the bookkeeping of the first K paths.
        #[arg(long, default_value_t = 0)]
        ledgers: usize,
        #[arg(long, default_value = "fracbin-out")]
        out: PathBuf,
    },
    /// Run every diagnostic and exit with 3 unless all pass.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        /// Comma-separated horizons, for example 256,1024,4096.
        #[arg(long = "N-list")]
        n_list: String,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "fracbin-out")]
        out: PathBuf,
    },
    /// Compare closed forms with brute force over all sign paths. Without
    /// --cH the standard fBm kernel constant is used, which keeps every
    /// price positive at small N.
    Enumerate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "N")]
        n: usize,
    },
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Numeric(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Validation(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

impl ModelArgs {
    fn params(&self, default_c_h: f64) -> Result<ModelParams, Failure> {
        Ok(ModelParams::new(self.hurst, self.sigma, self.c_h.unwrap_or(default_c_h), self.s0)?)
    }

    fn quad(&self) -> Result<QuadratureConfig, Failure> {
        let q = QuadratureConfig {
            nodes_per_panel: self.nodes_per_panel,
            max_panels: self.max_panels,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
        };
        q.validate()?;
        Ok(q)
    }

    fn table(&self, n: usize, params: &ModelParams) -> Result<(KernelTable, CacheOutcome), Failure> {
        if n < 2 {
            return Err(Failure::Validation(format!("N must be at least 2, got {n}")));
        }
        Ok(load_or_build(&self.cache_dir, n, params, &self.quad()?)?)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn schedules_for(table: &KernelTable, strategy: &StrategyArgs) -> Result<Schedules, Failure> {
    let theta = theta_limit(table.params(), strategy.tail_tol)?;
    Ok(make_schedules(table, theta.theta, strategy.kappa, strategy.eps_multiplier)?)
}

fn cmd_table(model: &ModelArgs, n: usize) -> Outcome {
    let params = model.params(1.0)?;
    let (table, outcome) = model.table(n, &params)?;
    let summary = json!({
        "N": n,
        "params": to_json(&params),
        "quadrature": to_json(table.quad()),
        "cache": if outcome == CacheOutcome::Hit { "hit" } else { "built" },
        "cache_dir": model.cache_dir.display().to_string(),
        "g_1": table.g(1),
        "g_N": table.g(n),
        "g_limit": params.g(),
    });
    print!("{}", pretty(&summary));
    Ok(())
}

fn cmd_constants(model: &ModelArgs, strategy: &StrategyArgs, n: usize) -> Outcome {
    let params = model.params(1.0)?;
    let (table, _) = model.table(n, &params)?;
    let theta = theta_limit(&params, strategy.tail_tol)?;
    let history = history_variance_limit(&params, strategy.tail_tol)?;
    let s = make_schedules(&table, theta.theta, strategy.kappa, strategy.eps_multiplier)?;
    let summary = json!({
        "N": n,
        "params": to_json(&params),
        "g": params.g(),
        "h": params.h(),
        "theta": theta.theta,
        "v4": theta.v4,
        "v3": theta.v3,
        "theta_tail_bound": theta.tail_bound,
        "history_variance_limit": history.value,
        "eps_N": s.eps,
        "B12": s.b12,
        "c_hat_N": s.c_hat,
        "c_N": s.c,
        "C_N": s.big_c,
        "lambda_N": s.lambda,
        "kappa": s.kappa,
        "eps_multiplier": s.eps_multiplier,
    });
    print!("{}", pretty(&summary));
    Ok(())
}

fn cmd_simulate(model: &ModelArgs, n: usize, paths: usize, seed: u64, out: &Path) -> Outcome {
    let params = model.params(1.0)?;
    let (table, _) = model.table(n, &params)?;
    let batch = simulate_batch(&table, seed, 0, paths)?;
    let dir = out.join(format!("paths_N{n}_seed{seed}"));
    for (idx, path) in batch.iter().enumerate() {
        let mut buf = Vec::new();
        path.write_csv(&mut buf).expect("in-memory write");
        write_file(&dir.join(format!("path_{idx}.csv")), &buf)?;
    }
    print!(
        "{}",
        pretty(&json!({"N": n, "paths": paths, "seed": seed, "dir": dir.display().to_string()}))
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_arbitrage(
    model: &ModelArgs,
    strategy: &StrategyArgs,
    n: usize,
    paths: usize,
    seed: u64,
    lambda: Option<f64>,
    ledgers: usize,
    out: &Path,
) -> Outcome {
    let params = model.params(1.0)?;
    let (table, _) = model.table(n, &params)?;
    let mut s = schedules_for(&table, strategy)?;
    if let Some(l) = lambda {
        if !(0.0..1.0).contains(&l) {
            return Err(Failure::Validation(format!("lambda must lie in [0, 1), got {l}")));
        }
        s.lambda = l;
    }
    let batch = simulate_batch(&table, seed, 0, paths)?;
    let mut csv = BufWriter::new(Vec::new());
    writeln!(csv, "{EXPERIMENT_HEADER}").expect("in-memory write");
    let (mut hits, mut stops, mut violations) = (0usize, 0usize, 0usize);
    for (idx, path) in batch.iter().enumerate() {
        let run = run_path(path, &table, &s)?;
        let row = ExperimentRow::new(idx as u64, &run, &s);
        row.write(&mut csv).expect("in-memory write");
        hits += (row.v_psi >= s.big_c) as usize;
        stops += row.t_n.is_some() as usize;
        violations += (row.min_v_psi < -s.c) as usize;
        if idx < ledgers {
            let mut buf = Vec::new();
            run.friction.ledger.write_csv(&path.s, &mut buf).expect("in-memory write");
            write_file(&out.join(format!("ledger_N{n}_path{idx}.csv")), &buf)?;
        }
    }
    let csv_path = out.join(format!("experiment_N{n}.csv"));
    write_file(&csv_path, &csv.into_inner().expect("flush"))?;
    let summary = json!({
        "N": n,
        "paths": paths,
        "seed": seed,
        "params": to_json(&params),
        "schedules": to_json(&s),
        "p_psi_hits_C_N": hits as f64 / paths.max(1) as f64,
        "p_stopped": stops as f64 / paths.max(1) as f64,
        "admissibility_violations": violations,
        "csv": csv_path.display().to_string(),
    });
    let text = pretty(&summary);
    write_file(&out.join(format!("arbitrage_N{n}.json")), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn cmd_verify(
    model: &ModelArgs,
    strategy: &StrategyArgs,
    n_list: &str,
    paths: usize,
    seed: u64,
    out: &Path,
) -> Outcome {
    let params = model.params(1.0)?;
    let n_list = parse_n_list(n_list)?;
    let config = McConfig {
        params,
        n_list,
        paths_per_n: paths,
        master_seed: seed,
        epsilon_multiplier: strategy.eps_multiplier,
        kappa: strategy.kappa,
        tail_tol: strategy.tail_tol,
    };
    config.validate()?;
    if config.n_list.len() < 3 {
        return Err(Failure::Validation("verify needs at least three horizons".into()));
    }
    let (table, _) = model.table(config.max_horizon(), &params)?;
    let sweep = run_sweep(&config, &table)?;
    let result = verify(&sweep, &table)?;
    for run in &sweep.runs {
        let mut buf = Vec::new();
        run.write_csv(&mut buf).expect("in-memory write");
        write_file(&out.join(format!("experiment_N{}.csv", run.horizon())), &buf)?;
    }
    let summary = json!({
        "config": to_json(&config),
        "quadrature": to_json(table.quad()),
        "theta": to_json(&sweep.theta),
        "schedules": sweep.runs.iter().map(|r| to_json(&r.schedules)).collect::<Vec<_>>(),
        "lln": to_json(&result.lln),
        "saa": to_json(&result.saa),
        "max_inequality": to_json(&result.max_inequality),
        "mixingale_fit": to_json(&result.mixingale),
        "mixingale_k": result.mixingale_k,
        "martingale_fit": to_json(&result.martingale),
        "martingale_N": result.martingale_n,
        "flags": to_json(&result.flags),
        "all_pass": result.all_pass(),
    });
    write_file(&out.join("summary.json"), pretty(&summary).as_bytes())?;
    for f in &result.flags {
        println!("{} {}: {}", if f.pass { "PASS" } else { "FAIL" }, f.name, f.detail);
    }
    if result.all_pass() {
        Ok(())
    } else {
        let failed: Vec<&str> = result.flags.iter().filter(|f| !f.pass).map(|f| f.name.as_str()).collect();
        Err(Failure::Verify(format!("failed: {}", failed.join(", "))))
    }
}

fn cmd_enumerate(model: &ModelArgs, n: usize) -> Outcome {
    let default_c_h = standard_c_h(model.hurst).map_err(Failure::from)?;
    let params = model.params(default_c_h)?;
    if n > fracbin::market::MAX_ENUMERATION {
        return Err(Failure::Validation(format!(
            "enumeration is limited to N <= {}, got {n}",
            fracbin::market::MAX_ENUMERATION
        )));
    }
    let (table, _) = model.table(n, &params)?;
    let report = enumeration_suite(&table)?;
    let max = report.max_discrepancy();
    let families: Vec<Value> = report
        .by_family()
        .into_iter()
        .map(|(name, worst, count)| json!({"family": name, "checks": count, "max_discrepancy": worst}))
        .collect();
    let summary = json!({
        "N": n,
        "params": to_json(&params),
        "paths": report.paths,
        "mean_S1_N": report.mean_s1,
        "mean_S2_N": report.mean_s2,
        "families": families,
        "max_discrepancy": max,
        "tolerance": ENUMERATION_TOL,
        "pass": max < ENUMERATION_TOL,
    });
    print!("{}", pretty(&summary));
    if max < ENUMERATION_TOL {
        Ok(())
    } else {
        Err(Failure::Verify(format!("max discrepancy {max:e}")))
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Validation(e.to_string()))?;
    }
    match &cli.command {
        Command::Table { model, n } => cmd_table(model, *n),
        Command::Constants { model, strategy, n } => cmd_constants(model, strategy, *n),
        Command::Simulate {
            model,
            n,
            paths,
            seed,
            out,
        } => cmd_simulate(model, *n, *paths, *seed, out),
        Command::Arbitrage {
            model,
            strategy,
            n,
            paths,
            seed,
            lambda,
            ledgers,
            out,
        } => cmd_arbitrage(model, strategy, *n, *paths, *seed, *lambda, *ledgers, out),
        Command::Verify {
            model,
            strategy,
            n_list,
            paths,
            seed,
            out,
        } => cmd_verify(model, strategy, n_list, *paths, *seed, out),
        Command::Enumerate { model, n } => cmd_enumerate(model, *n),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
