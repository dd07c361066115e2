use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spheroamb_core::io::{self, CoeffFile};
use spheroamb_core::sim::{self, simulate_observation, simulation_order, sweet_spot};
use spheroamb_core::spherical::{encode_spherical_with_report, reconstruct_field};
use spheroamb_core::spheroidal::encode_spheroidal;
use spheroamb_core::transcode::transcode;
use spheroamb_core::{
    ArrayGeometry, Error, ExperimentConfig, FieldGrid, PrecisionMode, StageExt, SwfContext,
};

/// Prolate spheroidal and spherical ambisonics for rigid-baffle microphone arrays.
#[derive(Debug, Parser)]
#[command(name = "spheroamb", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in single-incidence configuration.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output directory (or file, for commands producing one file).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Spheroidal wave function table cache; tables are built in memory when absent.
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Arithmetic for spheroidal wave function tables.
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    Double,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArrayKind {
    Sphere,
    Spheroid,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build spheroidal wave function tables and store them in the cache.
    Tables {
        /// Spheroidal parameter c = k a (default: from the configuration).
        #[arg(long)]
        c: Option<f64>,
        /// Highest degree n (default: what the configured experiment needs).
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Synthesize microphone pressures for every configured incidence.
    Simulate {
        /// Microphone array to simulate.
        #[arg(long, value_enum)]
        array: ArrayKind,
    },
    /// Estimate ambisonic coefficients from a pressure file.
    Encode {
        /// Microphone array that recorded the pressures.
        #[arg(long, value_enum)]
        array: ArrayKind,
        /// Pressure file written by `simulate`.
        #[arg(long, value_name = "PATH")]
        pressures: PathBuf,
        /// Truncation order (default: from the configuration).
        #[arg(long)]
        order: Option<usize>,
        /// Tikhonov weight (default: from the configuration).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Convert a spheroidal coefficient file into spherical coefficients.
    Transcode {
        /// Spheroidal coefficient file written by `encode`.
        #[arg(long, value_name = "PATH")]
        coeffs: PathBuf,
        /// Output order (default: the input order).
        #[arg(long)]
        n_out: Option<usize>,
        /// Highest spheroidal degree summed (default: from the configuration).
        #[arg(long)]
        n_sum: Option<usize>,
    },
    /// Evaluate a spherical coefficient file on the configured grid.
    Reconstruct {
        /// Spherical coefficient file written by `encode` or `transcode`.
        #[arg(long, value_name = "PATH")]
        coeffs: PathBuf,
        /// Incidence used as ground truth (default: the first configured).
        #[arg(long)]
        incidence: Option<String>,
        /// Mark baffle-interior points of this array.
        #[arg(long, value_enum)]
        array: Option<ArrayKind>,
    },
    /// SDR map and sweet-spot metrics from a ground-truth and a reconstruction grid.
    Evaluate {
        /// Ground-truth grid written by `experiment`.
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
        /// Reconstructed grid written by `reconstruct`.
        #[arg(long, value_name = "PATH")]
        rec: PathBuf,
        /// Exclude the interior of this array's baffle from the area statistic.
        #[arg(long, value_enum)]
        array: Option<ArrayKind>,
        /// SDR threshold in dB (default: from the configuration).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run both pipelines for every configured incidence and write all outputs.
    Experiment,
}

fn load_config(g: &GlobalArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&g.config, g.preset) {
        (Some(path), _) => ExperimentConfig::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        (None, Some(p)) => ExperimentConfig::preset(match p {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        })?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(p) = g.precision {
        cfg.precision = match p {
            Precision::Double => PrecisionMode::Double,
            Precision::Extended => PrecisionMode::Extended,
        };
    }
    if let Some(dir) = &g.cache {
        cfg.cache_dir = Some(dir.display().to_string());
    }
    if let Some(dir) = &g.out {
        cfg.output_dir = Some(dir.display().to_string());
    }
    Ok(cfg)
}

fn tables(cfg: &ExperimentConfig, c: f64, n_max: usize) -> anyhow::Result<SwfContext> {
    match &cfg.cache_dir {
        Some(dir) => Ok(io::load_tables(Path::new(dir), c, n_max, cfg.precision).stage("tables")?),
        None => {
            log::info!("building spheroidal tables in memory (c = {c}, N = {n_max})");
            Ok(SwfContext::build(c, n_max, cfg.precision).stage("tables")?)
        }
    }
}

fn array(cfg: &ExperimentConfig, kind: ArrayKind) -> anyhow::Result<ArrayGeometry> {
    Ok(match kind {
        ArrayKind::Sphere => cfg.sphere_array(),
        ArrayKind::Spheroid => cfg.spheroid_array(),
    }
    .stage("geometry")?)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| "out".into()))
}

fn out_file(g: &GlobalArgs, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn array_name(kind: ArrayKind) -> &'static str {
    match kind {
        ArrayKind::Sphere => "sphere",
        ArrayKind::Spheroid => "spheroid",
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    match cli.command {
        Command::Tables { c, n_max } => {
            let c = match c {
                Some(c) => c,
                None => cfg.spheroidal_c()?,
            };
            let n_max = n_max.unwrap_or_else(|| cfg.table_order());
            let dir = cfg
                .cache_dir
                .clone()
                .ok_or_else(|| anyhow!("`tables` needs --cache DIR to store the tables"))?;
            let ctx = SwfContext::build(c, n_max, cfg.precision).stage("tables")?;
            let path = io::write_tables(Path::new(&dir), &ctx)?;
            println!("{}", path.display());
        }
        Command::Simulate { array: kind } => {
            let mics = array(&cfg, kind)?;
            let n_sim = simulation_order(cfg.order);
            let ctx = match kind {
                ArrayKind::Spheroid => Some(tables(&cfg, cfg.spheroidal_c()?, cfg.table_order())?),
                ArrayKind::Sphere => None,
            };
            let dir = out_dir(&cfg);
            for inc in &cfg.incidences {
                let pw = cfg.wave(inc)?;
                let p = simulate_observation(&pw, &mics, n_sim, ctx.as_ref()).stage("simulate")?;
                let path = dir.join(format!("{}_{}_pressures.txt", inc.name, array_name(kind)));
                io::write_file(&path, &io::pressures_to_string(&mics, pw.k, &p))?;
                println!("{}", path.display());
            }
        }
        Command::Encode {
            array: kind,
            pressures,
            order,
            sigma,
        } => {
            let order = order.unwrap_or(cfg.order);
            let sigma = sigma.unwrap_or(cfg.sigma);
            let mics = array(&cfg, kind)?;
            let file = io::read_pressures(&pressures).stage("read pressures")?;
            if file.baffle != array_name(kind) {
                bail!(
                    "pressure file was recorded on a {}, not a {}",
                    file.baffle,
                    array_name(kind)
                );
            }
            let out = out_file(g, &format!("{}_coeffs.txt", array_name(kind)));
            match kind {
                ArrayKind::Sphere => {
                    let (c, report) = encode_spherical_with_report(&file.values, &mics, file.k, order, sigma)
                        .stage("encode")?;
                    log::info!("effective rank {} of {}", report.effective_rank, report.unknowns);
                    io::write_spherical(&out, &c)?;
                }
                ArrayKind::Spheroid => {
                    let params = cfg.spheroid_params()?;
                    let ctx = tables(&cfg, file.k * params.a, order.max(cfg.table_order()))?;
                    let (c, report) = encode_spheroidal(&file.values, &mics, &ctx, order, sigma).stage("encode")?;
                    log::info!(
                        "effective rank {} of {} (condition {:.3e})",
                        report.effective_rank,
                        report.unknowns,
                        report.condition_number()
                    );
                    io::write_spheroidal(&out, &c)?;
                }
            }
            println!("{}", out.display());
        }
        Command::Transcode { coeffs, n_out, n_sum } => {
            let CoeffFile::Spheroidal(sph) = io::read_coefficients(&coeffs).stage("read coefficients")? else {
                bail!("{} holds spherical coefficients; transcoding needs spheroidal ones", coeffs.display());
            };
            let n_sum = n_sum.unwrap_or(cfg.n_sum).max(sph.order);
            let ctx = tables(&cfg, sph.c, n_sum.max(cfg.table_order()))?;
            let out_coeffs = transcode(&sph, &ctx, n_out.unwrap_or(sph.order), n_sum).stage("transcode")?;
            let out = out_file(g, "transcoded_coeffs.txt");
            io::write_spherical(&out, &out_coeffs)?;
            println!("{}", out.display());
        }
        Command::Reconstruct {
            coeffs,
            incidence,
            array: kind,
        } => {
            let CoeffFile::Spherical(c) = io::read_coefficients(&coeffs).stage("read coefficients")? else {
                bail!("{} holds spheroidal coefficients; run `transcode` first", coeffs.display());
            };
            let inc = match &incidence {
                Some(name) => cfg
                    .incidences
                    .iter()
                    .find(|i| &i.name == name)
                    .ok_or_else(|| anyhow!("no incidence named `{name}` in the configuration"))?,
                None => &cfg.incidences[0],
            };
            let pw = cfg.wave(inc)?;
            let c = c.to_global();
            let points = cfg.grid.points();
            let truth = points.iter().map(|p| pw.value_at(p)).collect();
            let rec = reconstruct_field(&c, &points);
            let baffle = match kind {
                Some(k) => Some(array(&cfg, k)?.baffle),
                None => None,
            };
            let grid = FieldGrid::new(cfg.grid, c.k, truth, rec, baffle.as_ref()).stage("reconstruct")?;
            let out = out_file(g, "grid.txt");
            io::write_grid(&out, &grid)?;
            println!("{}", out.display());
        }
        Command::Evaluate {
            truth,
            rec,
            array: kind,
            threshold,
        } => {
            let baffle = match kind {
                Some(k) => Some(array(&cfg, k)?.baffle),
                None => None,
            };
            let t = io::read_grid(&truth, None).stage("read grid")?;
            let r = io::read_grid(&rec, baffle.as_ref()).stage("read grid")?;
            if t.spec != r.spec {
                bail!("grids {} and {} cover different points", truth.display(), rec.display());
            }
            let grid = FieldGrid::new(r.spec, r.k, t.p_rec, r.p_rec, baffle.as_ref()).stage("evaluate")?;
            let metrics = sweet_spot(&grid, threshold.unwrap_or(cfg.threshold_db));
            let text = serde_json::to_string_pretty(&metrics)? + "\n";
            match &g.out {
                Some(path) => io::write_file(path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Experiment => {
            let dir = out_dir(&cfg);
            let ctx = tables(&cfg, cfg.spheroidal_c()?, cfg.table_order())?;
            let cases = cfg.cases().stage("config")?;
            io::write_file(&dir.join("config.json"), &cfg.to_json())?;
            for case in &cases {
                let result = sim::run_case(case, &ctx)?;
                for path in io::write_case(&dir, &result, cfg.threshold_db)? {
                    println!("{}", path.display());
                }
                let (h, p) = (&result.hoa_metrics, &result.pshoa_metrics);
                eprintln!(
                    "{}: HOA {:.2} x {:.2} m, ps-HOA {:.2} x {:.2} m (30 dB widths along x, y)",
                    result.name, h.width_x, h.width_y, p.width_x, p.width_y
                );
            }
        }
    }
    Ok(())
}

/// Context chain down to the first core error, whose message already carries its causes.
fn render(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in err.chain() {
        parts.push(cause.to_string());
        if cause.is::<Error>() {
            break;
        }
    }
    parts.join(": ")
}

/// 2 for configuration and input problems, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let mut core = err.downcast_ref::<Error>();
    while let Some(Error::Stage { source, .. }) = core {
        core = Some(source);
    }
    match core {
        Some(Error::Config { .. }) | Some(Error::Parse(_)) | Some(Error::Underdetermined { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(k) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
