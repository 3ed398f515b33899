mod dist;

use charquant::charfns::DistSpec;
use charquant::codegen::{emit_coeff_json, emit_horner_c, emit_horner_expression, DEFAULT_DIGITS};
use charquant::diagnostics::{reference_scan, round_trip, uniform_grid, Oracle, ReferenceTable};
use charquant::diffring::{SymbolicStore, CACHE_DIR_ENV};
use charquant::moments::{zero_location, QuadratureConfig};
use charquant::pipeline::{build_quantile, BuiltQuantile, QuantileOptions};
use charquant::sampler::{sample, sample_levy_area, LevyAreaOptions, LevyTail};
use charquant::series::{build_series_with, DEFAULT_TERMS};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use dist::{DistArgs, Family};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "charquant",
    version,
    about = "Quantile functions, samples and C code from characteristic functions"
)]
struct Cli {
    /// JSON file overriding quadrature settings (rel_tol, abs_tol, truncation, max_subdivisions).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cache directory for recurrence polynomials [env: CHARQUANT_CACHE_DIR].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the central series and write its coefficients as JSON.
    Series {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value_t = DEFAULT_TERMS)]
        terms: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the level u0 with w(u0) = 0.
    U0 {
        #[command(flatten)]
        dist: DistArgs,
    },
    /// Evaluate the quantile at one or more levels.
    Quantile {
        #[command(flatten)]
        dist: DistArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Levels in (0, 1); repeat or separate with commas.
        #[arg(long, required = true, value_delimiter = ',')]
        u: Vec<f64>,
    },
    /// Draw a reproducible sample, one value per line.
    Sample {
        #[command(flatten)]
        dist: DistArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Time step of the Lévy area (levy-area only).
        #[arg(long)]
        delta_t: Option<f64>,
        /// Upper tail of the conditioned Lévy-area part.
        #[arg(long, value_enum, default_value_t = LevyTailArg::Exponential)]
        levy_tail: LevyTailArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round-trip and reference errors on a grid, as CSV.
    Diagnose {
        #[command(flatten)]
        dist: DistArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.1)]
        grid_start: f64,
        #[arg(long, default_value_t = 0.9)]
        grid_end: f64,
        #[arg(long, default_value_t = 17)]
        grid_n: usize,
        /// `normal`, `cauchy`, or a table file of u/quantile columns.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the symmetric series as C, a bare expression, or coefficient JSON.
    Codegen {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value_t = DEFAULT_TERMS)]
        terms: usize,
        #[arg(long, value_enum, default_value_t = LangArg::C)]
        lang: LangArg,
        #[arg(long, default_value_t = DEFAULT_DIGITS)]
        digits: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct ModelArgs {
    #[arg(long, default_value_t = DEFAULT_TERMS)]
    terms: usize,
    /// Central series only, even where a tail model exists.
    #[arg(long)]
    no_tail: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LangArg {
    C,
    Expression,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevyTailArg {
    None,
    Gaussian,
    Exponential,
}

enum Failure {
    /// Bad arguments or mathematics; exit code 2.
    Math(String),
    /// Filesystem trouble; exit code 3.
    Io(String),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Math(msg.into())
    }
}

/// Tag a library error with the stage that raised it.
fn at<T>(stage: &str, r: charquant::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let msg = format!("{stage}: {e}");
        if e.is_io() {
            Failure::Io(msg)
        } else {
            Failure::Math(msg)
        }
    })
}

struct Context {
    cfg: QuadratureConfig,
    store: SymbolicStore,
}

fn default_cache_dir() -> Option<PathBuf> {
    if let Some(d) = std::env::var_os(CACHE_DIR_ENV).filter(|s| !s.is_empty()) {
        return Some(PathBuf::from(d));
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME").filter(|s| !s.is_empty()) {
        return Some(PathBuf::from(d).join("charquant"));
    }
    std::env::var_os("HOME")
        .filter(|s| !s.is_empty())
        .map(|h| PathBuf::from(h).join(".cache").join("charquant"))
}

fn context(cli: &Cli) -> Result<Context, Failure> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("reading config {}: {e}", path.display())))?;
            let cfg: QuadratureConfig = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
            at("config", cfg.validate())?;
            cfg
        }
        None => QuadratureConfig::default(),
    };
    let dir = cli.cache_dir.clone().or_else(default_cache_dir);
    log::debug!("cache directory: {dir:?}");
    Ok(Context {
        cfg,
        store: SymbolicStore::new(dir),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Io(format!("writing {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Failure::Io(format!("writing stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn spec_of(dist: &DistArgs) -> Result<DistSpec, Failure> {
    if dist.family() == Some(Family::LevyArea) {
        return Err(Failure::usage("levy-area is only available to `sample`"));
    }
    dist.to_spec().map_err(Failure::usage)
}

fn build(ctx: &Context, spec: &DistSpec, dist: &DistArgs, model: ModelArgs) -> Result<BuiltQuantile, Failure> {
    let opts = QuantileOptions {
        nterms: model.terms,
        tails: !model.no_tail,
        scale: dist.scale,
        ..QuantileOptions::default()
    };
    let built = at("series construction", build_quantile(spec, &ctx.store, &opts, &ctx.cfg))?;
    if let Some(s) = built.switch {
        log::info!("tail joined at u = {:.4} (relative gap {:.2e})", s.u_switch, s.gap);
    }
    Ok(built)
}

fn cmd_series(ctx: &Context, dist: &DistArgs, terms: usize, out: Option<&Path>) -> Result<(), Failure> {
    let spec = spec_of(dist)?;
    let cf = at("characteristic function", spec.descriptor())?;
    let cf = if dist.scale == 1.0 { cf } else { at("scaling", cf.scaled(dist.scale))? };
    let mut cs = at("series construction", build_series_with(&cf, &ctx.store, terms, &ctx.cfg))?;
    cs.dist.get_or_insert(spec);
    let mut value: serde_json::Value =
        serde_json::from_str(&emit_coeff_json(&cs).text).expect("coefficient JSON parses");
    if cs.symmetric {
        let horner = at("horner form", cs.horner_coeffs())?;
        value["horner"] = serde_json::json!(horner);
    }
    emit(out, &(serde_json::to_string_pretty(&value).expect("json") + "\n"))
}

fn cmd_u0(ctx: &Context, dist: &DistArgs) -> Result<(), Failure> {
    let spec = spec_of(dist)?;
    let cf = at("characteristic function", spec.descriptor())?;
    let u0 = at("zero location", zero_location(&cf, &ctx.cfg))?;
    emit(None, &format!("{u0}\n"))
}

fn cmd_quantile(ctx: &Context, dist: &DistArgs, model: ModelArgs, levels: &[f64]) -> Result<(), Failure> {
    if let Some(&u) = levels.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
        return Err(Failure::usage(format!("quantile level must lie in (0, 1), got {u}")));
    }
    let spec = spec_of(dist)?;
    let built = build(ctx, &spec, dist, model)?;
    let mut text = String::new();
    for &u in levels {
        if !built.quantile.in_trusted_range(u) {
            log::warn!("u = {u} lies beyond the trusted central range");
        }
        let w = at("evaluation", built.quantile.eval(u))?;
        let _ = writeln!(text, "{w}");
    }
    emit(None, &text)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    ctx: &Context,
    dist: &DistArgs,
    model: ModelArgs,
    n: usize,
    seed: u64,
    delta_t: Option<f64>,
    levy_tail: LevyTailArg,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let batch = if dist.family() == Some(Family::LevyArea) {
        let spec = dist.to_spec().map_err(Failure::usage)?;
        let DistSpec::LevyAreaP { r } = spec else { unreachable!() };
        let dt = delta_t.ok_or_else(|| Failure::usage("levy-area needs --delta-t"))?;
        let opts = LevyAreaOptions {
            nterms: model.terms,
            tail: if model.no_tail {
                LevyTail::None
            } else {
                match levy_tail {
                    LevyTailArg::None => LevyTail::None,
                    LevyTailArg::Gaussian => LevyTail::Gaussian,
                    LevyTailArg::Exponential => LevyTail::Exponential,
                }
            },
            ..LevyAreaOptions::default()
        };
        at("sampling", sample_levy_area(r, dt, n, seed, &opts, &ctx.store, &ctx.cfg))?
    } else {
        if delta_t.is_some() {
            return Err(Failure::usage("--delta-t applies to levy-area only"));
        }
        let spec = spec_of(dist)?;
        let built = build(ctx, &spec, dist, model)?;
        let mut b = at("sampling", sample(&built.quantile, n, seed))?;
        b.dist = spec.to_json();
        b
    };
    let mut text = String::with_capacity(24 * batch.n + 128);
    let _ = writeln!(text, "# dist: {}", batch.dist);
    if dist.scale != 1.0 {
        let _ = writeln!(text, "# scale: {}", dist.scale);
    }
    let _ = writeln!(text, "# seed: {}", batch.seed);
    let _ = writeln!(text, "# n: {}", batch.n);
    for x in &batch.values {
        let _ = writeln!(text, "{x}");
    }
    emit(out, &text)
}

fn oracle_for(name: &str, spec: &DistSpec, scale: f64) -> Result<Oracle, Failure> {
    match name {
        "normal" => match *spec {
            DistSpec::Gaussian { mu } if mu == 0.0 => Ok(Oracle::Normal { sigma: scale }),
            DistSpec::Stable { alpha, beta } if alpha == 2.0 && beta == 0.0 => Ok(Oracle::Normal {
                sigma: std::f64::consts::SQRT_2 * scale,
            }),
            _ => Err(Failure::usage("the normal oracle needs gaussian (mu = 0) or stable alpha = 2")),
        },
        "cauchy" => match *spec {
            DistSpec::Stable { alpha, beta } if alpha == 1.0 && beta == 0.0 => {
                Ok(Oracle::Cauchy { scale })
            }
            _ => Err(Failure::usage("the cauchy oracle needs stable alpha = 1")),
        },
        path => {
            let table = ReferenceTable::load(Path::new(path));
            Ok(Oracle::Table(at("reference table", table)?))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_diagnose(
    ctx: &Context,
    dist: &DistArgs,
    model: ModelArgs,
    start: f64,
    end: f64,
    n: usize,
    oracle: Option<&str>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let spec = spec_of(dist)?;
    let oracle = oracle.map(|o| oracle_for(o, &spec, dist.scale)).transpose()?;
    let grid = match &oracle {
        Some(Oracle::Table(t)) => {
            at("grid", uniform_grid(start, end, 1))?;
            let g = t.levels_in(start, end);
            if g.is_empty() {
                return Err(Failure::usage(format!(
                    "reference table has no levels in [{start}, {end}]"
                )));
            }
            g
        }
        _ => at("grid", uniform_grid(start, end, n))?,
    };
    let built = build(ctx, &spec, dist, model)?;
    let rep = at("round trip", round_trip(&built.quantile, &built.descriptor, &grid, &ctx.cfg))?;
    let scan = oracle
        .as_ref()
        .map(|o| at("reference scan", reference_scan(&built.quantile, o, &grid)))
        .transpose()?;
    let mut text = String::new();
    let _ = writeln!(text, "# dist: {}", spec.to_json());
    if dist.scale != 1.0 {
        let _ = writeln!(text, "# scale: {}", dist.scale);
    }
    let _ = writeln!(text, "# terms: {}", model.terms);
    if let Some(s) = built.switch {
        let _ = writeln!(text, "# tail_switch: {}", s.u_switch);
    }
    let _ = writeln!(text, "# max_abs_rte: {:e}", rep.max_abs_rte);
    let _ = writeln!(text, "# max_abs_eqe: {:e}", rep.max_abs_eqe);
    if let Some(s) = &scan {
        let _ = writeln!(text, "# max_rel_err: {:e}", s.max_rel_err);
    }
    let _ = writeln!(text, "# runtime_secs: {:.3}", rep.runtime_secs);
    text.push_str("u,w,rte,eqe");
    if scan.is_some() {
        text.push_str(",reference,rel_err,log10_rel_err");
    }
    text.push('\n');
    for i in 0..grid.len() {
        let _ = write!(text, "{},{:e},{:e},{:e}", rep.grid[i], rep.w[i], rep.rte[i], rep.eqe[i]);
        if let Some(s) = &scan {
            let r = &s.rows[i];
            let _ = write!(text, ",{:e},{:e},{:.4}", r.reference, r.rel_err, r.log10_rel_err());
        }
        text.push('\n');
    }
    emit(out, &text)
}

fn cmd_codegen(
    ctx: &Context,
    dist: &DistArgs,
    terms: usize,
    lang: LangArg,
    digits: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let spec = spec_of(dist)?;
    let cf = at("characteristic function", spec.descriptor())?;
    let cf = if dist.scale == 1.0 { cf } else { at("scaling", cf.scaled(dist.scale))? };
    let cs = at("series construction", build_series_with(&cf, &ctx.store, terms, &ctx.cfg))?;
    let code = match lang {
        LangArg::C => at("code generation", emit_horner_c(&cs, digits))?,
        LangArg::Expression => at("code generation", emit_horner_expression(&cs, digits))?,
        LangArg::Json => emit_coeff_json(&cs),
    };
    emit(out, &code.text)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = context(&cli)?;
    match &cli.cmd {
        Command::Series { dist, terms, out } => cmd_series(&ctx, dist, *terms, out.as_deref()),
        Command::U0 { dist } => cmd_u0(&ctx, dist),
        Command::Quantile { dist, model, u } => cmd_quantile(&ctx, dist, *model, u),
        Command::Sample {
            dist,
            model,
            n,
            seed,
            delta_t,
            levy_tail,
            out,
        } => cmd_sample(&ctx, dist, *model, *n, *seed, *delta_t, *levy_tail, out.as_deref()),
        Command::Diagnose {
            dist,
            model,
            grid_start,
            grid_end,
            grid_n,
            oracle,
            out,
        } => cmd_diagnose(
            &ctx,
            dist,
            *model,
            *grid_start,
            *grid_end,
            *grid_n,
            oracle.as_deref(),
            out.as_deref(),
        ),
        Command::Codegen {
            dist,
            terms,
            lang,
            digits,
            out,
        } => cmd_codegen(&ctx, dist, *terms, *lang, *digits, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Math(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
