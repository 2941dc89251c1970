use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use survhc::data::{
    bin_subjects, km_curve, parse_intervals, parse_subjects, render_intervals, IntervalTable,
};
use survhc::decay::{calibrate, simulate, Hypothesis};
use survhc::error::{Result, SurvError};
use survhc::hc::{hchg, test_hchg, test_strict, test_two_way, TestDecision};
use survhc::hyg::Direction;
use survhc::phase::{run_grid, GridConfig, RhoEstimate, Statistic};
use survhc::resample::{empirical_pvalue, null_quantile, relabel_table, NullCalibration};
use survhc::seed::derived_rng;
use survhc::svg::{heatmap_svg, km_svg};

#[derive(Parser)]
#[command(
    name = "survhc",
    version,
    about = "Two-group survival comparison via Higher Criticism of exact hypergeometric P-values"
)]
struct Cli {
    /// Worker threads (default: SURVHC_THREADS env var, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test two groups for a survival difference
    Test(TestArgs),
    /// Simulate a decaying two-group cohort
    Simulate(SimulateArgs),
    /// Monte-Carlo power over a (beta, r) grid with transition fits
    PowerGrid(PowerGridArgs),
    /// Survival curves, optionally with flagged intervals shaded
    Km(KmArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Subjects,
    Intervals,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    OneSidedY,
    OneSidedX,
    Strict,
    TwoWay,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum HypothesisArg {
    H0,
    H1,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV path
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "subjects")]
    format: InputFormat,
    /// Number of equal-width intervals (subject-level input only)
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, value_enum, default_value = "one-sided-y")]
    mode: Mode,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Permutation replicates for the null calibration
    #[arg(long, default_value_t = 10000)]
    null_sims: usize,
    #[arg(long, default_value_t = 0.3)]
    gamma0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cache stem: calibrations persist as <stem>.<stat>.json/.csv
    #[arg(long)]
    null_cache: Option<PathBuf>,
    /// Comma-separated statistics to report alongside hchg
    #[arg(long, value_delimiter = ',', default_value = "hchg")]
    stats: Vec<String>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "t-len")]
    t_len: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    x0: Option<u64>,
    #[arg(long)]
    y0: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "h1")]
    hypothesis: HypothesisArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; ground truth goes to <stem>.truth.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PowerGridArgs {
    /// Grid as start:stop:step (inclusive)
    #[arg(long)]
    beta_grid: String,
    #[arg(long)]
    r_grid: String,
    #[arg(long = "t-len")]
    t_len: usize,
    /// H1 replicates per cell
    #[arg(long, default_value_t = 200)]
    n_reps: usize,
    #[arg(long, default_value_t = 20000)]
    null_sims: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Level of the binomial substantiality test
    #[arg(long, default_value_t = 0.05)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.3)]
    gamma0: f64,
    #[arg(long, value_delimiter = ',', default_value = "hchg,logrank")]
    stats: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Also write heatmap_<stat>.svg
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct KmArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "subjects")]
    format: InputFormat,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Write an SVG plot here
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Permutation replicates used to decide whether to shade intervals
    #[arg(long, default_value_t = 10000)]
    null_sims: usize,
    #[arg(long, default_value_t = 0.3)]
    gamma0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct DeltaStarRow {
    t: usize,
    n_x_prev: u64,
    n_y_prev: u64,
    o_x: u64,
    o_y: u64,
    p: f64,
}

#[derive(Serialize)]
struct StatisticReport {
    name: String,
    value: f64,
    null_quantile: f64,
    p_value: f64,
    reject: bool,
}

#[derive(Serialize)]
struct ReportManifest {
    input: String,
    format: String,
    bins: Option<usize>,
    intervals: usize,
    mode: Mode,
    alpha: f64,
    gamma0: f64,
    null_sims: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TestReport {
    manifest: ReportManifest,
    decision: TestDecision,
    delta_star: Vec<DeltaStarRow>,
    statistics: Vec<StatisticReport>,
}

fn load_table(input: &Path, format: InputFormat, bins: usize) -> Result<IntervalTable> {
    let text = std::fs::read_to_string(input)?;
    match format {
        InputFormat::Subjects => bin_subjects(&parse_subjects(&text)?, bins),
        InputFormat::Intervals => parse_intervals(&text),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SurvError::Argument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Permutation-null calibration of one statistic against the observed
/// table, with optional disk caching under `<stem>.<name>.{json,csv}`.
fn permutation_calibration(
    name: &str,
    table: &IntervalTable,
    eval: impl Fn(&IntervalTable) -> f64 + Sync,
    n_sims: usize,
    alpha: f64,
    seed: u64,
    cache: Option<&Path>,
) -> Result<NullCalibration> {
    let stem = cache.map(|c| {
        let mut s = c.as_os_str().to_owned();
        s.push(format!(".{name}"));
        PathBuf::from(s)
    });
    if let Some(stem) = &stem {
        let mut json_path = stem.as_os_str().to_owned();
        json_path.push(".json");
        if Path::new(&json_path).exists() {
            let calib = NullCalibration::load(stem)?;
            if calib.statistic_name == name
                && calib.n_sims == n_sims
                && calib.alpha == alpha
                && calib.seed == seed
            {
                return Ok(calib);
            }
        }
    }
    let calib = null_quantile(
        name,
        |rep_seed| {
            let permuted = relabel_table(table, &mut derived_rng(rep_seed, &[]))?;
            Ok(eval(&permuted))
        },
        n_sims,
        alpha,
        seed,
    )?;
    if let Some(stem) = &stem {
        calib.save(stem)?;
    }
    Ok(calib)
}

fn mode_statistic(table: &IntervalTable, mode: Mode, gamma0: f64) -> f64 {
    let stat = |dir| {
        hchg(table, dir, gamma0)
            .map(|r| r.statistic)
            .unwrap_or(f64::NEG_INFINITY)
    };
    match mode {
        Mode::OneSidedY => stat(Direction::YExcess),
        Mode::OneSidedX => stat(Direction::XExcess),
        // strict and two-way decisions share the envelope null
        Mode::Strict | Mode::TwoWay => stat(Direction::YExcess).max(stat(Direction::XExcess)),
    }
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let table = load_table(&args.input, args.format, args.bins)?;
    let hchg_calib = permutation_calibration(
        "hchg",
        &table,
        |t| mode_statistic(t, args.mode, args.gamma0),
        args.null_sims,
        args.alpha,
        args.seed,
        args.null_cache.as_deref(),
    )?;
    let crit = hchg_calib.quantile;
    let decision = match args.mode {
        Mode::OneSidedY => test_hchg(&table, Direction::YExcess, args.gamma0, crit)?,
        Mode::OneSidedX => test_hchg(&table, Direction::XExcess, args.gamma0, crit)?,
        Mode::Strict => test_strict(&table, args.gamma0, crit)?,
        Mode::TwoWay => test_two_way(&table, args.gamma0, crit)?,
    };
    let detail = match args.mode {
        Mode::OneSidedX => hchg(&table, Direction::XExcess, args.gamma0)?,
        _ => hchg(&table, Direction::YExcess, args.gamma0)?,
    };
    let delta_star = detail
        .delta_star
        .iter()
        .map(|&t| DeltaStarRow {
            t,
            n_x_prev: table.n_x_prev[t - 1],
            n_y_prev: table.n_y_prev[t - 1],
            o_x: table.o_x[t - 1],
            o_y: table.o_y[t - 1],
            p: detail.pvalues.values[t - 1],
        })
        .collect();

    let mut statistics = Vec::new();
    for (i, name) in args.stats.iter().enumerate() {
        let stat = Statistic::parse(name)?;
        let calib = if stat == Statistic::Hchg {
            hchg_calib.clone()
        } else {
            permutation_calibration(
                stat.name(),
                &table,
                |t| stat.eval(t, args.gamma0),
                args.null_sims,
                args.alpha,
                // distinct null streams per extra statistic
                args.seed ^ (i as u64 + 1),
                args.null_cache.as_deref(),
            )?
        };
        let value = if stat == Statistic::Hchg {
            mode_statistic(&table, args.mode, args.gamma0)
        } else {
            stat.eval(&table, args.gamma0)
        };
        statistics.push(StatisticReport {
            name: stat.name().to_string(),
            value,
            null_quantile: calib.quantile,
            p_value: empirical_pvalue(value, &calib),
            reject: value > calib.quantile,
        });
    }

    let report = TestReport {
        manifest: ReportManifest {
            input: args.input.display().to_string(),
            format: match args.format {
                InputFormat::Subjects => "subjects".into(),
                InputFormat::Intervals => "intervals".into(),
            },
            bins: (args.format == InputFormat::Subjects).then_some(args.bins),
            intervals: table.len(),
            mode: args.mode,
            alpha: args.alpha,
            gamma0: args.gamma0,
            null_sims: args.null_sims,
            seed: args.seed,
        },
        decision,
        delta_star,
        statistics,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct TruthSidecar {
    hypothesis: HypothesisArg,
    t_len: usize,
    beta: f64,
    r: f64,
    x0: u64,
    y0: u64,
    lambda_bar: f64,
    seed: u64,
    nonnull_set: Vec<usize>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let params = calibrate(args.t_len, args.beta, args.r, args.x0, args.y0, args.lambda)?;
    let hypothesis = match args.hypothesis {
        HypothesisArg::H0 => Hypothesis::H0,
        HypothesisArg::H1 => Hypothesis::H1,
    };
    let outcome = simulate(&params, hypothesis, args.seed);
    std::fs::write(&args.out, render_intervals(&outcome.table))?;
    let truth = TruthSidecar {
        hypothesis: args.hypothesis,
        t_len: params.t_len,
        beta: params.beta,
        r: params.r,
        x0: params.x0,
        y0: params.y0,
        lambda_bar: params.lambda_bar,
        seed: args.seed,
        nonnull_set: outcome.nonnull_set,
    };
    let mut truth_path = args.out.as_os_str().to_owned();
    truth_path.push(".truth.json");
    std::fs::write(
        PathBuf::from(truth_path),
        serde_json::to_string_pretty(&truth)? + "\n",
    )?;
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(SurvError::Argument(format!(
            "grid must be start:stop:step, got {spec:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| SurvError::Argument(format!("bad grid number {p:?}")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(SurvError::Argument(format!(
            "grid needs stop >= start and step > 0, got {spec:?}"
        )));
    }
    let count = ((stop - start) / step + 1.0 + 1e-9).floor() as usize;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn write_matrix_csv(
    path: &Path,
    beta_grid: &[f64],
    r_grid: &[f64],
    value: impl Fn(usize, usize) -> String,
) -> Result<()> {
    let mut out = String::from("beta_r");
    for r in r_grid {
        out.push_str(&format!(",{r}"));
    }
    out.push('\n');
    for (bi, beta) in beta_grid.iter().enumerate() {
        out.push_str(&beta.to_string());
        for ri in 0..r_grid.len() {
            out.push(',');
            out.push_str(&value(bi, ri));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn cmd_power_grid(args: &PowerGridArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    check_alpha(args.alpha1)?;
    let statistics = args
        .stats
        .iter()
        .map(|s| Statistic::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let config = GridConfig {
        beta_grid: parse_grid(&args.beta_grid)?,
        r_grid: parse_grid(&args.r_grid)?,
        t_len: args.t_len,
        x0: None,
        y0: None,
        lambda_bar: None,
        n_reps: args.n_reps,
        n_null_sims: args.null_sims,
        alpha: args.alpha,
        alpha1: args.alpha1,
        gamma0: args.gamma0,
        statistics,
        master_seed: args.seed,
    };
    let result = run_grid(&config)?;
    std::fs::create_dir_all(&args.out)?;
    for (grid, curve) in result.grids.iter().zip(&result.curves) {
        let name = grid.statistic.name();
        write_matrix_csv(
            &args.out.join(format!("power_{name}.csv")),
            &grid.beta_grid,
            &grid.r_grid,
            |bi, ri| grid.power[bi][ri].to_string(),
        )?;
        write_matrix_csv(
            &args.out.join(format!("substantial_{name}.csv")),
            &grid.beta_grid,
            &grid.r_grid,
            |bi, ri| u8::from(grid.substantial[bi][ri]).to_string(),
        )?;
        let mut out = String::from("beta,theta0,theta1,rho_hat,rho_theory,rho_bonf\n");
        for p in &curve.points {
            let rho = match p.rho_hat {
                RhoEstimate::Value(v) => v.to_string(),
                RhoEstimate::AtMostMin(v) => format!("<={v}"),
                RhoEstimate::AboveMax(v) => format!(">{v}"),
                RhoEstimate::Undefined => "NA".into(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.beta, p.theta0, p.theta1, rho, p.rho_theory, p.rho_bonf
            ));
        }
        std::fs::write(args.out.join(format!("transition_{name}.csv")), out)?;
        if args.svg {
            std::fs::write(
                args.out.join(format!("heatmap_{name}.svg")),
                heatmap_svg(grid, curve),
            )?;
        }
    }
    let manifest = serde_json::json!({
        "beta_grid": config.beta_grid,
        "r_grid": config.r_grid,
        "t_len": config.t_len,
        "n_reps": config.n_reps,
        "null_sims": config.n_null_sims,
        "alpha": config.alpha,
        "alpha1": config.alpha1,
        "gamma0": config.gamma0,
        "statistics": config.statistics.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "seed": config.master_seed,
    });
    std::fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

fn cmd_km(args: &KmArgs) -> Result<()> {
    check_alpha(args.alpha)?;
    let table = load_table(&args.input, args.format, args.bins)?;
    let curve = km_curve(&table);
    let mut tsv = String::from("t\ts_x\ts_y\n");
    for t in 0..table.len() {
        tsv.push_str(&format!("{}\t{}\t{}\n", t + 1, curve.s_x[t], curve.s_y[t]));
    }
    print!("{tsv}");
    if let Some(svg_path) = &args.svg {
        let calib = permutation_calibration(
            "hchg",
            &table,
            |t| {
                hchg(t, Direction::YExcess, args.gamma0)
                    .map(|r| r.statistic)
                    .unwrap_or(f64::NEG_INFINITY)
            },
            args.null_sims,
            args.alpha,
            args.seed,
            None,
        )?;
        let result = hchg(&table, Direction::YExcess, args.gamma0)?;
        let delta_star = if result.statistic > calib.quantile {
            result.delta_star.clone()
        } else {
            Vec::new()
        };
        let mut ticks = Vec::new();
        for t in 1..=table.len() {
            if table.c_x[t - 1] > 0 {
                ticks.push((t, false));
            }
            if table.c_y[t - 1] > 0 {
                ticks.push((t, true));
            }
        }
        std::fs::write(svg_path, km_svg(&curve, &delta_star, &ticks))?;
    }
    Ok(())
}

fn exit_code_for(err: &SurvError) -> u8 {
    match err {
        SurvError::Parse { .. }
        | SurvError::Validation(_)
        | SurvError::Argument(_)
        | SurvError::Degenerate(_) => 2,
        SurvError::Replicate { source, .. } => exit_code_for(source),
        SurvError::Io(_) | SurvError::Json(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("SURVHC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(2);
        }
        // ignore failure: the global pool can only be configured once
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::PowerGrid(args) => cmd_power_grid(args),
        Command::Km(args) => cmd_km(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
