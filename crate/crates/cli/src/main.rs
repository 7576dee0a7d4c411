#![allow(clippy::neg_cmp_op_on_partial_ord)]

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use visrrt_core::sim::suite::SensorConfig;
use visrrt_core::sim::svg::{render_overlay, Overlay};
use visrrt_core::sim::{self, ControllerKind, ExperimentParams, Variant};
use visrrt_core::{load_world, WorldModel};

mod bench;

#[derive(Parser)]
#[command(
    name = "visrrt",
    version,
    about = "Visibility-aware RRT* planning and tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan on the known obstacles of a world and write plan.json.
    Plan(PlanArgs),
    /// Track a plan in closed loop with hidden obstacles and write metrics.
    Simulate(SimulateArgs),
    /// Run every entry of a suite in parallel.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// World file.
    #[arg(long)]
    env: PathBuf,
    /// Experiment parameters (TOML); unspecified fields keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 45.0)]
    fov_deg: f64,
    #[arg(long, default_value_t = 3.0)]
    range: f64,
    /// Also write an SVG rendering.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Ablation: drop the visibility constraint from steering.
    #[arg(long)]
    no_visibility: bool,
    /// Drop truncated steering prefixes instead of keeping them as nodes.
    #[arg(long)]
    discard_truncated: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    CbfQp,
    Gatekeeper,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    controller: Controller,
    #[arg(long)]
    plan: PathBuf,
    /// Metrics JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Planner variant used when the gatekeeper asks for a replan.
    #[arg(long)]
    no_visibility: bool,
    /// Seed of the first replan; later ones add the replan count.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    backup_decel: Option<f64>,
    #[arg(long)]
    k_v: Option<f64>,
    #[arg(long)]
    k_omega: Option<f64>,
    #[arg(long)]
    v_cruise: Option<f64>,
    /// Class-K gains of the tracker's collision HOCBF.
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

impl Common {
    fn load(&self) -> Result<(WorldModel, ExperimentParams, visrrt_core::SensorSpec)> {
        let world = load_world(&read(&self.env)?)
            .with_context(|| format!("loading {}", self.env.display()))?;
        let params = match &self.params {
            Some(p) => {
                toml::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ExperimentParams::default(),
        };
        if !(self.fov_deg > 0.0 && self.fov_deg <= 180.0 && self.range > 0.0) {
            bail!("sensor needs 0 < fov-deg <= 180 and range > 0");
        }
        let sensor = SensorConfig {
            fov_deg: self.fov_deg,
            range: self.range,
        }
        .spec();
        Ok((world, params, sensor))
    }
}

fn variant(no_visibility: bool) -> Variant {
    if no_visibility {
        Variant::NoVisibility
    } else {
        Variant::Ours
    }
}

fn plan(args: PlanArgs) -> Result<()> {
    let (world, mut params, sensor) = args.common.load()?;
    params.planner.max_iter = args.max_iter;
    params.planner.seed = args.seed;
    params.planner.keep_truncated = !args.discard_truncated;
    let result = sim::initial_plan(&world, sensor, &params, variant(args.no_visibility))?;
    sim::write_plan(&result, &args.out)?;
    if let Some(svg) = &args.common.svg {
        write(svg, &sim::render_svg(&result, None, &world))?;
    }
    println!(
        "success {} cost {:.3} nodes {} iterations {}",
        result.success,
        result.cost,
        result.tree.len(),
        result.iterations_used
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (world, mut params, sensor) = args.common.load()?;
    let initial = sim::read_plan(&args.plan)?;
    if let Some(seed) = args.seed {
        params.planner.seed = seed;
    }
    if let Some(n) = args.max_iter {
        params.planner.max_iter = n;
    }
    let overrides = [
        (args.backup_decel, &mut params.gatekeeper.backup_decel),
        (args.k_v, &mut params.tracker.k_v),
        (args.k_omega, &mut params.tracker.k_omega),
        (args.v_cruise, &mut params.tracker.v_cruise),
        (args.gamma1, &mut params.tracker.barrier.gamma1),
        (args.gamma2, &mut params.tracker.barrier.gamma2),
    ];
    for (value, field) in overrides {
        if let Some(v) = value {
            if !(v > 0.0) {
                bail!("gain overrides must be positive, got {v}");
            }
            *field = v;
        }
    }
    let controller = match args.controller {
        Controller::CbfQp => ControllerKind::CbfQp,
        Controller::Gatekeeper => ControllerKind::Gatekeeper,
    };
    let run = sim::simulate(
        &world,
        sensor,
        &params,
        controller,
        variant(args.no_visibility),
        initial,
    )?;
    sim::write_metrics(&run.metrics, &args.out)?;
    if let Some(svg) = &args.common.svg {
        write(svg, &render_run(&run, &world))?;
    }
    let m = &run.metrics;
    println!(
        "{:?} time {:.2}s length {:.2}m min clearance {:.3}m detections {} replans {} backups {}",
        m.outcome,
        m.sim_time,
        m.path_length,
        m.min_clearance,
        m.detections.len(),
        m.replans,
        m.backup_activations
    );
    Ok(())
}

/// Last plan with the executed trajectory, `B_t` and detections on top.
pub(crate) fn render_run(run: &sim::Run, world: &WorldModel) -> String {
    let plan = run
        .plans
        .iter()
        .rev()
        .find(|p| p.success)
        .unwrap_or(&run.plans[0]);
    render_overlay(
        plan,
        world,
        Overlay {
            metrics: Some(&run.metrics),
            free_set: Some(&run.free_set),
            trajectory: &run.trajectory,
        },
    )
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan(args) => plan(args),
        Command::Simulate(args) => simulate(args),
        Command::Bench(args) => bench::run(&args.suite, &args.out),
    }
}
