use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bdisac::bcd::pareto::{level_grid, sweep_pareto, ParetoCurve, VerifySettings};
use bdisac::bcd::{verify_region_properties, BcdSettings, Scheme, SchemeRegistry};
use bdisac::io::{self, CurveRecord, CurveSummary, PlotKind, RunManifest};
use bdisac::scene::Scene;
use bdisac::{load_config, Error, Mode, Problem, SceneConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "bdisac",
    version,
    about = "Sensing/communication Pareto boundary of BD-assisted OFDM ISAC"
)]
struct Cli {
    /// TOML scene configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 1 runs sweep levels one after another.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,

    /// Also render every plot table as SVG.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one constrained problem.
    Single {
        #[arg(long)]
        mode: Mode,
        /// Floor on the constrained metric (rate for p1, SMI for p2).
        #[arg(long)]
        gamma: f64,
        /// Read `--gamma` as a fraction of the constrained metric's maximum.
        #[arg(long)]
        relative: bool,
        #[arg(long, default_value = "spp")]
        scheme: String,
    },
    /// Trace one boundary with a level sweep.
    Sweep {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value = "spp")]
        scheme: String,
    },
    /// Sweep several schemes over a shared level grid.
    Benchmark {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',', default_value = "spp,sp,tdma,nobd")]
        schemes: Vec<String>,
    },
    /// Sweep and check the region properties of the boundary.
    Verify {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value = "spp")]
        scheme: String,
        #[arg(long, default_value_t = 50)]
        throttles: usize,
    },
    /// Hardware cost of RIS, BD-SPP and BD-SP.
    Cost {
        /// Inclusive element range `a:b`.
        #[arg(long, default_value = "0:200")]
        n_range: String,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
    },
    /// Plot tables from curve CSVs, one series per file. A file given as
    /// `label=path` names its series; otherwise the file stem is used.
    Plot {
        #[arg(long, default_value = "boundary")]
        kind: PlotKind,
        #[arg(long, default_value = "plot")]
        name: String,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(required = true)]
        files: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value = "p1")]
    mode: Mode,
    /// Number of levels between 2% and 98% of the constrained metric's maximum.
    #[arg(long, default_value_t = 10)]
    levels: usize,
    /// Explicit ascending levels instead of a grid.
    #[arg(long, value_delimiter = ',')]
    level_values: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.parallel.max(1))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            if let Some(Error::Infeasible { .. }) = e.downcast_ref::<Error>() {
                eprintln!("infeasible: {e}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

enum Outcome {
    Done,
    Infeasible(String),
}

struct Session {
    config: SceneConfig,
    scene: Scene,
    settings: BcdSettings,
    registry: SchemeRegistry,
}

fn resolved_config(cli: &Cli) -> anyhow::Result<SceneConfig> {
    let mut config = match &cli.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => SceneConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load(cli: &Cli) -> anyhow::Result<Session> {
    let config = resolved_config(cli)?;
    let scene = Scene::build(&config)?;
    let settings = BcdSettings::from_scene(&scene);
    Ok(Session {
        config,
        scene,
        settings,
        registry: SchemeRegistry::builtin(),
    })
}

fn manifest(
    cli: &Cli,
    config: &SceneConfig,
    command: &str,
    schemes: &[&str],
    levels: Option<Vec<f64>>,
) -> anyhow::Result<()> {
    let m = RunManifest {
        command: command.to_string(),
        config_path: cli.config.clone(),
        output_dir: cli.out.clone(),
        seeds: vec![config.seed],
        schemes: schemes.iter().map(|s| s.to_string()).collect(),
        levels,
        args: std::env::args().skip(1).collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    io::write_manifest(&cli.out, &m, config)?;
    Ok(())
}

/// Largest value of the metric that `mode` floors.
fn floored_max(ctx: &Session, mode: Mode, scheme: &dyn Scheme) -> anyhow::Result<f64> {
    let run = scheme.solve(
        &ctx.scene,
        &Problem {
            mode: mode.other(),
            level: 0.0,
        },
        &ctx.settings,
    )?;
    Ok(match mode {
        Mode::P1 => run.rate,
        Mode::P2 => run.smi,
    })
}

fn sweep_levels(ctx: &Session, args: &SweepArgs, scheme: &dyn Scheme) -> anyhow::Result<Vec<f64>> {
    match &args.level_values {
        Some(v) => Ok(v.clone()),
        None => Ok(level_grid(
            floored_max(ctx, args.mode, scheme)?,
            args.levels,
        )),
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let parallel = cli.parallel > 1;
    match &cli.command {
        Command::Cost { n_range, c, c0 } => {
            let (a, b) = n_range
                .split_once(':')
                .and_then(|(a, b)| {
                    Some((
                        a.trim().parse::<usize>().ok()?,
                        b.trim().parse::<usize>().ok()?,
                    ))
                })
                .with_context(|| format!("--n-range expects `a:b`, got `{n_range}`"))?;
            if a > b {
                bail!("--n-range start {a} exceeds end {b}");
            }
            manifest(cli, &resolved_config(cli)?, "cost", &[], None)?;
            let table = io::cost_table(a, b, *c, *c0)?;
            let files = io::emit_table(&cli.out, "cost", &table, cli.svg)?;
            let t = bdisac::bcd::cost_model(b.max(1) as f64, *c, *c0)?;
            println!(
                "BD-SP/RIS = {:.6}  BD-SPP/RIS = {:.6}",
                t.bd_sp / t.ris,
                t.bd_spp / t.ris
            );
            report_files(&files);
            Ok(Outcome::Done)
        }
        Command::Plot {
            kind,
            name,
            title,
            files,
        } => {
            manifest(cli, &resolved_config(cli)?, "plot", &[], None)?;
            let inputs: Vec<io::PlotInput> =
                files.iter().map(|f| io::PlotInput::parse(f)).collect();
            let (table, warnings) = io::plot_data(*kind, title, &inputs);
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            report_files(&io::emit_table(&cli.out, name, &table, cli.svg)?);
            Ok(Outcome::Done)
        }
        Command::Single {
            mode,
            gamma,
            relative,
            scheme,
        } => {
            let ctx = load(cli)?;
            let scheme = ctx.registry.get(scheme)?;
            let level = if *relative {
                gamma * floored_max(&ctx, *mode, scheme)?
            } else {
                *gamma
            };
            let run = scheme.solve(&ctx.scene, &Problem { mode: *mode, level }, &ctx.settings)?;
            manifest(
                cli,
                &ctx.config,
                "single",
                &[scheme.name()],
                Some(vec![level]),
            )?;
            io::write_curve_csv(&cli.out.join("curve.csv"), &[CurveRecord::from_run(&run)])?;
            io::write_trace_csv(&cli.out.join("trace.csv"), &run.trace)?;
            let feasible = run.feasible;
            println!(
                "{} {}: I_r = {:.6} C_d = {:.6} feasible {} outer iterations {}",
                run.scheme, mode, run.smi, run.rate, run.feasible, run.outer_iters
            );
            let curve = ParetoCurve {
                scheme: run.scheme.clone(),
                mode: *mode,
                points: vec![bdisac::bcd::CurvePoint::from_run(run)],
            };
            let summary = CurveSummary::validated(
                &curve,
                &*scheme.evaluation_scene(&ctx.scene)?,
                &verify_settings(&ctx, 50),
            )?;
            io::write_json(&cli.out.join("summary.json"), &summary)?;
            if feasible {
                Ok(Outcome::Done)
            } else {
                Ok(Outcome::Infeasible(format!("level {level:.6e} not met")))
            }
        }
        Command::Sweep { sweep, scheme } => {
            let ctx = load(cli)?;
            let scheme = ctx.registry.get(scheme)?;
            let levels = sweep_levels(&ctx, sweep, scheme)?;
            manifest(
                cli,
                &ctx.config,
                "sweep",
                &[scheme.name()],
                Some(levels.clone()),
            )?;
            let curve = sweep_pareto(
                &ctx.scene,
                &levels,
                sweep.mode,
                scheme,
                &ctx.settings,
                parallel,
            )?;
            let summary = write_curve(&cli.out, &curve, &ctx, scheme, 50)?;
            print_summary(&summary);
            let table = io::boundary_table("Boundary", &[(curve.scheme.clone(), records(&curve))]);
            report_files(&io::emit_table(&cli.out, "boundary", &table, cli.svg)?);
            Ok(Outcome::Done)
        }
        Command::Benchmark { sweep, schemes } => {
            let ctx = load(cli)?;
            let chosen: Vec<&dyn Scheme> = schemes
                .iter()
                .map(|s| ctx.registry.get(s))
                .collect::<Result<_, _>>()?;
            // Shared grid from the scheme with the largest reach.
            let levels = match &sweep.level_values {
                Some(v) => v.clone(),
                None => {
                    let mut max = 0.0f64;
                    for s in &chosen {
                        max = max.max(floored_max(&ctx, sweep.mode, *s)?);
                    }
                    level_grid(max, sweep.levels)
                }
            };
            let names: Vec<&str> = chosen.iter().map(|s| s.name()).collect();
            manifest(cli, &ctx.config, "benchmark", &names, Some(levels.clone()))?;
            let mut all = Vec::new();
            let mut series = Vec::new();
            let mut summaries = Vec::new();
            for s in &chosen {
                let curve =
                    sweep_pareto(&ctx.scene, &levels, sweep.mode, *s, &ctx.settings, parallel)?;
                let summary = write_curve(&cli.out.join(s.name()), &curve, &ctx, *s, 50)?;
                print_summary(&summary);
                summaries.push(summary);
                all.extend(records(&curve));
                series.push((curve.scheme.clone(), records(&curve)));
            }
            io::write_curve_csv(&cli.out.join("curve.csv"), &all)?;
            io::write_json(&cli.out.join("summary.json"), &summaries)?;
            let table = io::boundary_table("Scheme comparison", &series);
            report_files(&io::emit_table(&cli.out, "schemes", &table, cli.svg)?);
            Ok(Outcome::Done)
        }
        Command::Verify {
            sweep,
            scheme,
            throttles,
        } => {
            let ctx = load(cli)?;
            let scheme = ctx.registry.get(scheme)?;
            let levels = sweep_levels(&ctx, sweep, scheme)?;
            manifest(
                cli,
                &ctx.config,
                "verify",
                &[scheme.name()],
                Some(levels.clone()),
            )?;
            let curve = sweep_pareto(
                &ctx.scene,
                &levels,
                sweep.mode,
                scheme,
                &ctx.settings,
                parallel,
            )?;
            let scene = scheme.evaluation_scene(&ctx.scene)?;
            let report =
                verify_region_properties(&curve, &scene, &verify_settings(&ctx, *throttles))?;
            let monotone = bdisac::bcd::pareto::is_level_monotone(&curve, 1e-6);
            write_curve(&cli.out, &curve, &ctx, scheme, *throttles)?;
            io::write_json(&cli.out.join("region.json"), &report)?;
            println!(
                "points {} throttles {}/{} inside, level-monotone {}, violations {}",
                report.points_checked,
                report.throttles_inside,
                report.throttles_checked,
                monotone,
                report.violations.len()
            );
            for v in &report.violations {
                println!("  level {:.6e}: {}", v.constraint_level, v.reason);
            }
            if report.passed() && monotone {
                Ok(Outcome::Done)
            } else {
                bail!("region properties violated")
            }
        }
    }
}

fn verify_settings(ctx: &Session, throttles: usize) -> VerifySettings {
    VerifySettings {
        throttles_per_point: throttles,
        seed: ctx.config.seed,
    }
}

fn records(curve: &ParetoCurve) -> Vec<CurveRecord> {
    curve.points.iter().map(CurveRecord::from_point).collect()
}

/// Curve CSV, one trace CSV per level and the validated summary.
fn write_curve(
    dir: &Path,
    curve: &ParetoCurve,
    ctx: &Session,
    scheme: &dyn Scheme,
    throttles: usize,
) -> anyhow::Result<CurveSummary> {
    io::write_curve_csv(&dir.join("curve.csv"), &records(curve))?;
    for (i, p) in curve.points.iter().enumerate() {
        io::write_trace_csv(
            &dir.join("traces").join(format!("level_{i:03}.csv")),
            &p.trace,
        )?;
    }
    let scene = scheme.evaluation_scene(&ctx.scene)?;
    let summary = CurveSummary::validated(curve, &scene, &verify_settings(ctx, throttles))?;
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn print_summary(s: &CurveSummary) {
    println!(
        "{} {}: {}/{} levels feasible, {} boundary points",
        s.scheme,
        s.mode,
        s.feasible,
        s.levels,
        s.boundary.len()
    );
    for f in &s.failures {
        println!("  {f}");
    }
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}
