//! `visrrt bench`: every suite run in parallel, one JSON and SVG per run and
//! a summary per variant × controller cell.

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;
use visrrt_core::load_world;
use visrrt_core::sim::suite::{RunSpec, Suite};
use visrrt_core::sim::{self, ControllerKind, Outcome, RunMetrics, Variant};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub variant: Variant,
    pub controller: ControllerKind,
    pub runs: usize,
    pub success_rate: f64,
    pub mean_path_length: f64,
    pub mean_replans: f64,
}

pub fn summarize<'a>(
    results: impl IntoIterator<Item = (&'a RunSpec, &'a RunMetrics)>,
) -> Vec<Cell> {
    let mut cells: BTreeMap<(Variant, ControllerKind), Vec<&RunMetrics>> = BTreeMap::new();
    for (spec, m) in results {
        cells
            .entry((spec.variant, spec.controller))
            .or_default()
            .push(m);
    }
    cells
        .into_iter()
        .map(|((variant, controller), ms)| {
            let n = ms.len() as f64;
            Cell {
                variant,
                controller,
                runs: ms.len(),
                success_rate: ms
                    .iter()
                    .filter(|m| m.outcome == Outcome::ReachedGoal)
                    .count() as f64
                    / n,
                mean_path_length: ms.iter().map(|m| m.path_length).sum::<f64>() / n,
                mean_replans: ms.iter().map(|m| m.replans as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn table(cells: &[Cell]) -> String {
    let mut out = String::from(
        "| variant | controller | runs | success rate | mean path length (m) | mean replans |\n",
    );
    out.push_str("|---|---|---|---|---|---|\n");
    for c in cells {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.2} | {:.2} | {:.2} |",
            name(&c.variant),
            name(&c.controller),
            c.runs,
            c.success_rate,
            c.mean_path_length,
            c.mean_replans
        );
    }
    out
}

/// Serialized (kebab-case) name of a unit enum.
fn name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn run(suite_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(suite_path)
        .with_context(|| format!("reading {}", suite_path.display()))?;
    let suite = Suite::parse(&text).with_context(|| format!("parsing {}", suite_path.display()))?;
    let base = suite_path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let results: Vec<(&RunSpec, RunMetrics)> = suite
        .runs
        .par_iter()
        .map(|spec| {
            let env_file = suite
                .envs
                .get(&spec.env)
                .with_context(|| format!("run {}: unknown env {}", spec.name, spec.env))?;
            let env_path = base.join(env_file);
            let world = load_world(
                &std::fs::read_to_string(&env_path)
                    .with_context(|| format!("reading {}", env_path.display()))?,
            )
            .with_context(|| format!("loading {}", env_path.display()))?;
            let run = sim::run_experiment_traced(
                &world,
                suite.sensor_for(spec),
                &suite.params_for(spec),
                spec.controller,
                spec.variant,
            )
            .with_context(|| format!("run {}", spec.name))?;
            sim::write_metrics(&run.metrics, &out.join(format!("{}.json", spec.name)))?;
            sim::write_plan(&run.plans[0], &out.join(format!("{}.plan.json", spec.name)))?;
            std::fs::write(
                out.join(format!("{}.svg", spec.name)),
                crate::render_run(&run, &world),
            )?;
            Ok((spec, run.metrics))
        })
        .collect::<Result<_>>()?;

    for (spec, m) in &results {
        println!(
            "{:<12} {:?} length {:.2}m replans {} backups {}",
            spec.name, m.outcome, m.path_length, m.replans, m.backup_activations
        );
    }
    let cells = summarize(results.iter().map(|(s, m)| (*s, m)));
    let table = table(&cells);
    print!("\n{table}");
    std::fs::write(out.join("summary.md"), &table)?;
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&cells)? + "\n",
    )?;
    Ok(())
}
