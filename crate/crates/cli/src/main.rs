use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltlab_core::analysis::{
    average_constants, averaging_csv, chebotarev_count, chebotarev_csv, chebotarev_rows, constants_csv,
    error_report, pi_er, predict_csv, sato_tate_report, satotate_csv, write_figure_csvs,
};
use ltlab_core::constants::{verify_c_inverse, DEFAULT_CUTOFF};
use ltlab_core::density::DEFAULT_TOL;
use ltlab_core::galois::{main_factor, ratio_to_f64};
use ltlab_core::table::write_atomic;
use ltlab_core::{build_table, load_table, save_table, ConstantProfile, CurveConfig, DensityModel, Error, TraceTable};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "ltlab", version, about = "Frobenius trace tables and Lang-Trotter predictions")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Opts {
    /// Curve configuration file.
    #[arg(long, global = true)]
    curve: Option<PathBuf>,
    /// Prime cutoff x.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    x: u64,
    /// Worker threads for table builds (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Euler product prime cutoff L.
    #[arg(long, global = true, default_value_t = DEFAULT_CUTOFF)]
    euler_cutoff: u64,
    /// Relative quadrature tolerance.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Output directory; also the table cache unless LTLAB_CACHE_DIR is set.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, allow_hyphen_values = true)]
    r_min: Option<i64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    r_max: Option<i64>,
    #[arg(long, global = true)]
    q: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<i64>,
    #[arg(long, global = true, default_value_t = 40)]
    bins: usize,
    #[arg(long, env = "LTLAB_CACHE_DIR", hide_env_values = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and store a_p for all good primes up to x.
    Build,
    /// Write C_{E,r} for r in [r-min, r-max].
    Constants,
    /// Write C_{E,r} and F_{E,r}(x) for r in [r-min, r-max].
    Predict,
    /// Write figure1.csv .. figure5.csv from a stored table.
    Report,
    /// Compare a stored table with predictions; exit 1 on failure.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Chebotarev,
    Satotate,
    Averaging,
    Invariants,
}

enum Failure {
    Core(Error),
    Usage(String),
    MissingTable(PathBuf),
    CheckFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Ctx {
    opts: Opts,
    cfg: CurveConfig,
}

impl Ctx {
    fn table_path(&self) -> PathBuf {
        let dir = self.opts.cache_dir.clone().unwrap_or_else(|| self.opts.out.clone());
        dir.join(format!("{}-{}.lttb", self.cfg.curve.label, self.opts.x))
    }

    fn load(&self) -> std::result::Result<TraceTable, Failure> {
        let path = self.table_path();
        if !path.exists() {
            return Err(Failure::MissingTable(path));
        }
        let table = load_table(&path)?;
        if (table.a, table.b) != (self.cfg.curve.a, self.cfg.curve.b) {
            return Err(Failure::Usage(format!(
                "{} holds y^2 = x^3 + {}x + {}, not the configured curve",
                path.display(),
                table.a,
                table.b
            )));
        }
        Ok(table)
    }

    fn profile(&self, table: Option<&TraceTable>) -> std::result::Result<ConstantProfile, Failure> {
        Ok(ConstantProfile::from_config(&self.cfg, table, self.opts.euler_cutoff)?)
    }

    /// Exact image if configured, else the stored table for an empirical estimate.
    fn profile_with_fallback(&self) -> std::result::Result<ConstantProfile, Failure> {
        if self.cfg.exact_image()?.is_some() {
            return self.profile(None);
        }
        let table = self.load()?;
        self.profile(Some(&table))
    }

    fn r_range(&self, default: i64) -> (i64, i64) {
        (self.opts.r_min.unwrap_or(-default), self.opts.r_max.unwrap_or(default))
    }

    fn write(&self, name: &str, body: &str) -> Outcome {
        let path = self.opts.out.join(name);
        write_atomic(&path, body.as_bytes())?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

fn verdict(out: &mut String, name: &str, pass: bool, detail: String) -> bool {
    let _ = writeln!(out, "{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn cmd_build(ctx: &Ctx) -> Outcome {
    let workers = ctx
        .opts
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let start = Instant::now();
    let table = build_table(&ctx.cfg.curve, ctx.opts.x, workers)?;
    let path = ctx.table_path();
    save_table(&table, &path)?;
    println!(
        "{}: {} primes up to {} ({} bad) in {:.1}s -> {}",
        ctx.cfg.curve,
        table.len(),
        table.x_max,
        table.bad_primes.len(),
        start.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn cmd_constants(ctx: &Ctx) -> Outcome {
    let profile = ctx.profile_with_fallback()?;
    let (lo, hi) = ctx.r_range(100);
    ctx.write(&format!("constants-{}.csv", ctx.cfg.curve.label), &constants_csv(&profile, lo, hi)?)
}

fn cmd_predict(ctx: &Ctx) -> Outcome {
    let profile = ctx.profile_with_fallback()?;
    let edge = (2.0 * (ctx.opts.x as f64).sqrt()).floor() as i64;
    let (lo, hi) = ctx.r_range(edge);
    let body = predict_csv(&profile, ctx.opts.x as f64, lo, hi, ctx.opts.tol)?;
    ctx.write(&format!("predict-{}.csv", ctx.cfg.curve.label), &body)
}

fn cmd_report(ctx: &Ctx) -> Outcome {
    let table = ctx.load()?;
    let profile = ctx.profile(Some(&table))?;
    let report = error_report(&table, &profile, ctx.opts.x, ctx.opts.tol)?;
    write_figure_csvs(&report, &ctx.opts.out)?;
    let s = &report.summary;
    println!(
        "{} rows; {:.4} of {} inner rows within +-5; mean normalized error {:.4}; max {:.3}",
        report.rows.len(),
        s.fraction_within_band,
        s.rows_considered,
        s.mean_norm_err,
        s.max_abs_norm_err
    );
    if let Some(zero) = report.cm_zero_count {
        println!("supersingular primes: {zero}");
    }
    Ok(())
}

fn check_chebotarev(ctx: &Ctx, out: &mut String) -> std::result::Result<bool, Failure> {
    let table = ctx.load()?;
    let image = ctx
        .cfg
        .exact_image()?
        .ok_or_else(|| Failure::Usage("chebotarev check needs an exact image (serre_curve or trace_counts)".into()))?;
    let q = ctx.opts.q.unwrap_or(ctx.cfg.m_e);
    let rows = chebotarev_rows(&table, ctx.opts.x, q, Some(&image), ctx.cfg.is_cm())?;
    ctx.write("chebotarev.csv", &chebotarev_csv(&rows))?;
    let mut ok = true;
    for row in &rows {
        let pass = match row.rel_dev {
            Some(dev) => dev.abs() < 0.03,
            None => row.count <= 2,
        };
        let detail = match row.rel_dev {
            Some(dev) => format!("count {} relative deviation {dev:+.5} (limit 0.03)", row.count),
            None => format!("count {} in a density-zero class (limit 2)", row.count),
        };
        ok &= verdict(out, &format!("chebotarev a={} q={q}", row.a), pass, detail);
    }
    Ok(ok)
}

fn check_satotate(ctx: &Ctx, out: &mut String) -> std::result::Result<bool, Failure> {
    let table = ctx.load()?;
    let model = DensityModel::for_cm(ctx.cfg.is_cm());
    let report = sato_tate_report(&table, model, ctx.opts.bins, ctx.opts.x)?;
    ctx.write("satotate.csv", &satotate_csv(&report))?;
    let limit = if ctx.cfg.is_cm() { 0.02 } else { 0.01 };
    let mut ok = verdict(
        out,
        "sato-tate sup CDF distance",
        report.sup_cdf_distance < limit,
        format!("{:.5} (limit {limit})", report.sup_cdf_distance),
    );
    if let Some((count, freq)) = report.atom {
        ok &= verdict(
            out,
            "supersingular frequency",
            (freq - 0.5).abs() < 0.02,
            format!("{count} primes, frequency {freq:.5} (target 0.5 +- 0.02)"),
        );
    }
    Ok(ok)
}

fn check_averaging(ctx: &Ctx, out: &mut String) -> std::result::Result<bool, Failure> {
    let profile = ctx.profile_with_fallback()?;
    let q = ctx.opts.q.unwrap_or(1);
    let a = ctx.opts.a.unwrap_or(0);
    let start = ctx.opts.r_min.unwrap_or(0);
    let end = ctx.opts.r_max.unwrap_or(start + 100_000);
    if end <= start {
        return Err(Failure::Usage(format!("empty range ({start}, {end}]")));
    }
    let row = average_constants(&profile, a, q, start, (end - start) as u64)?;
    ctx.write("averaging.csv", &averaging_csv(std::slice::from_ref(&row)))?;
    let pass = if profile.is_cm() {
        let m = (start.abs().max(end.abs()) as f64).max(3.0);
        let bound = 50.0 * q as f64 * m.ln().powi(3);
        verdict(
            out,
            "averaging",
            row.deviation <= bound,
            format!("deviation {:.4} (bound 50 q log^3 M = {bound:.1})", row.deviation),
        )
    } else {
        let limit = if q == 1 { 1e-3 } else { 1e-2 };
        let rel = row.deviation / row.predicted;
        verdict(out, "averaging", rel < limit, format!("relative deviation {rel:.3e} (limit {limit:e})"))
    };
    Ok(pass)
}

fn check_invariants(ctx: &Ctx, out: &mut String) -> std::result::Result<bool, Failure> {
    let table = ctx.load()?;
    let profile = ctx.profile(Some(&table))?;
    let mut ok = verdict(
        out,
        "table structure",
        table.validate().is_ok(),
        table.validate().err().unwrap_or_else(|| format!("{} records, Hasse bound holds", table.len())),
    );
    let edge = (2.0 * (table.x_max as f64).sqrt()).floor() as i64;
    let total: u64 = (-edge..=edge).map(|r| pi_er(&table.records, r)).sum();
    ok &= verdict(
        out,
        "pi_Er partition",
        total == table.len() as u64,
        format!("sum {total} vs {} records", table.len()),
    );
    let q = profile.m_e;
    let classes: u64 = (0..q as i64).map(|a| chebotarev_count(&table.records, a, q)).sum();
    ok &= verdict(
        out,
        "residue partition",
        classes == table.len() as u64,
        format!("sum over a mod {q} = {classes}"),
    );
    let mean: f64 = (0..q as i64).map(|r| ratio_to_f64(&profile.main_factor(r))).sum::<f64>() / q as f64;
    ok &= verdict(out, "main factor mean", (mean - 1.0).abs() < 1e-12, format!("{mean}"));
    if let Some(image) = ctx.cfg.exact_image()? {
        let exact: Vec<_> = (0..q as i64).map(|r| main_factor(&image, r)).collect();
        ok &= verdict(
            out,
            "main factors from image",
            exact == profile.main_factors,
            format!("level {}", image.level),
        );
    }
    let residual = verify_c_inverse(&profile, ctx.opts.euler_cutoff.min(100_000).max(1000))?;
    ok &= verdict(out, "C inverse identity", residual < 1e-6, format!("residual {residual:.3e}"));
    Ok(ok)
}

fn cmd_check(ctx: &Ctx, which: CheckKind) -> Outcome {
    let mut out = String::new();
    let pass = match which {
        CheckKind::Chebotarev => check_chebotarev(ctx, &mut out)?,
        CheckKind::Satotate => check_satotate(ctx, &mut out)?,
        CheckKind::Averaging => check_averaging(ctx, &mut out)?,
        CheckKind::Invariants => check_invariants(ctx, &mut out)?,
    };
    print!("{out}");
    if pass {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}

fn run(cli: Cli) -> Outcome {
    let curve = cli
        .opts
        .curve
        .clone()
        .ok_or_else(|| Failure::Usage("--curve is required".into()))?;
    if cli.opts.x < 5 {
        return Err(Failure::Usage(format!("--x must be at least 5, got {}", cli.opts.x)));
    }
    if cli.opts.workers == Some(0) {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    if cli.opts.euler_cutoff < 1000 {
        return Err(Failure::Usage("--euler-cutoff must be at least 1000".into()));
    }
    let cfg = CurveConfig::load(Path::new(&curve)).map_err(|e| match e {
        Error::Io(io) => Failure::Usage(format!("{}: {io}", curve.display())),
        other => Failure::Core(other),
    })?;
    let ctx = Ctx { opts: cli.opts, cfg };
    match cli.cmd {
        Command::Build => cmd_build(&ctx),
        Command::Constants => cmd_constants(&ctx),
        Command::Predict => cmd_predict(&ctx),
        Command::Report => cmd_report(&ctx),
        Command::Check { which } => cmd_check(&ctx, which),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::CorruptFile(_) | Error::TruncatedFile { .. } => EXIT_IO,
        Error::LevelTooLarge { .. } => EXIT_BUDGET,
        Error::Config { .. }
        | Error::Precondition { .. }
        | Error::Domain(_)
        | Error::Divisibility { .. }
        | Error::SingularCurve { .. }
        | Error::CoefficientOverflow { .. }
        | Error::RamifiedPrime { .. } => EXIT_USAGE,
        _ => EXIT_CHECK_FAILED,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::MissingTable(path)) => {
            eprintln!("error: no trace table at {} (run `ltlab build` first)", path.display());
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
