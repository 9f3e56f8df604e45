use std::path::Path;

use anyhow::{Context, Result};
use gw_bounds::barycenter::{self, BaryDistance, BaryInit, BarycenterConfig};
use gw_bounds::bounds::pairwise_matrix;
use gw_bounds::shapes::{shape_dataset, Shape};
use gw_bounds::spaces::{load_space, matrix_to_csv, mm_from_point_cloud, parse_csv_matrix, SpaceFormat};
use gw_bounds::{Error, MmSpace, PointCloud, StructuredSpace};
use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

use crate::args::{BaryArgs, BaryDistanceArg, BenchArgs, Cli, Command, CommonArgs, DistArgs, Format, IsoArgs, KnnArgs, RuleArg};
use crate::bench::{run_bench, BenchConfig};
use crate::isotest::{run_isotest, IsoConfig};
use crate::knn::{encode_labels, knn_accuracy};
use crate::manifest::{rows_to_csv, Output, RunManifest};

fn validation(msg: impl Into<String>) -> anyhow::Error {
    Error::Domain(msg.into()).into()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
        .with_context(|| format!("reading {}", path.display()))
}

fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    let rows = parse_csv_matrix(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!("{} is empty or ragged", path.display())).into());
    }
    Ok(Array2::from_shape_vec((rows.len(), cols), rows.concat())?)
}

fn load_point_cloud(path: &Path) -> Result<MmSpace> {
    let pc = PointCloud::uniform(load_matrix(path)?).with_context(|| format!("loading {}", path.display()))?;
    Ok(mm_from_point_cloud(&pc)?)
}

/// Runs one parsed command line. Returns whether every solver converged.
pub fn run(cli: &Cli) -> Result<bool> {
    let c = &cli.common;
    let out = Output::new(c.out.clone())?;
    let manifest = match &cli.command {
        Command::Dist(a) => dist(c, a, &out)?,
        Command::Knn(a) => knn(c, a, &out)?,
        Command::Isotest(a) => isotest(c, a, &out)?,
        Command::Bench(a) => bench(c, a, &out)?,
        Command::Bary(a) => bary(c, a, &out)?,
    };
    out.finish(&manifest)?;
    Ok(manifest.converged)
}

fn snapshot(c: &CommonArgs, args: &impl Serialize) -> Result<serde_json::Value> {
    Ok(json!({ "common": c, "args": args }))
}

fn dist(c: &CommonArgs, a: &DistArgs, out: &Output) -> Result<RunManifest> {
    a.bound_args.single().map_err(validation)?;
    let cfg = a.bound_args.config(c.seed);
    cfg.validate()?;
    let mut manifest = RunManifest::new("dist", c.seed, snapshot(c, a)?);
    let (spaces, names, labels) = manifest.time("load", || -> Result<_> {
        if let Some(per_class) = a.shapes {
            let (clouds, labels) = shape_dataset(per_class, a.shape_points, c.seed)?;
            let spaces = clouds
                .iter()
                .map(|pc| Ok(StructuredSpace::unlabeled(mm_from_point_cloud(pc)?)))
                .collect::<Result<Vec<_>>>()?;
            let names: Vec<String> = (0..spaces.len()).map(|i| format!("shape{i}")).collect();
            Ok((spaces, names, Some(labels)))
        } else {
            if a.inputs.len() < 2 {
                return Err(validation("dist needs at least two inputs"));
            }
            let spaces = a
                .inputs
                .iter()
                .map(|p| load_space(p, SpaceFormat::from_path(p)).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let names = a.inputs.iter().map(|p| p.display().to_string()).collect();
            Ok((spaces, names, None))
        }
    })?;
    let matrix = manifest.time("distances", || pairwise_matrix(&spaces, a.bound, &cfg))?;
    manifest.converged = matrix.converged;
    let mut meta = matrix.metadata_json();
    meta["inputs"] = json!(names);
    let stem = format!("dist_{}", a.bound.name());
    match c.format {
        Format::Csv => out.csv(&mut manifest, &format!("{stem}.csv"), &matrix.to_csv(), meta)?,
        Format::Json => {
            let rows: Vec<Vec<f64>> = matrix.values.rows().into_iter().map(|r| r.to_vec()).collect();
            meta["values"] = json!(rows);
            out.json(&mut manifest, &format!("{stem}.json"), meta)?;
        }
    }
    if let Some(labels) = labels {
        if !out.is_stdout() {
            let body: String = labels.iter().map(|&l| format!("{}\n", Shape::ALL[l].name())).collect();
            out.csv(&mut manifest, "labels.csv", &body, json!({ "classes": Shape::ALL }))?;
        }
    }
    Ok(manifest)
}

fn parse_labels(text: &str) -> Vec<String> {
    text.lines()
        .flat_map(|l| l.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Serialize)]
struct SplitRow {
    split: usize,
    accuracy: f64,
}

fn knn(c: &CommonArgs, a: &KnnArgs, out: &Output) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("knn", c.seed, snapshot(c, a)?);
    let dist = load_matrix(&a.matrix)?;
    let (labels, classes) = encode_labels(&parse_labels(&read_text(&a.labels)?));
    let report = manifest.time("classify", || knn_accuracy(&dist, &labels, a.k, a.splits, a.train_frac, c.seed))?;
    eprintln!(
        "accuracy {:.2} +- {:.2} % over {} splits",
        100.0 * report.mean,
        100.0 * report.std,
        report.splits
    );
    let mut doc = serde_json::to_value(&report)?;
    doc["classes"] = json!(classes);
    match c.format {
        Format::Csv => {
            let rows: Vec<SplitRow> = report
                .accuracies
                .iter()
                .enumerate()
                .map(|(split, &accuracy)| SplitRow { split, accuracy })
                .collect();
            doc.as_object_mut().expect("object").remove("accuracies");
            out.csv(&mut manifest, "knn.csv", &rows_to_csv(&rows)?, doc)?;
        }
        Format::Json => out.json(&mut manifest, "knn.json", doc)?,
    }
    Ok(manifest)
}

#[derive(Serialize)]
struct IsoCsvRow {
    method: String,
    mean: f64,
    std: f64,
    accuracies: String,
}

fn isotest(c: &CommonArgs, a: &IsoArgs, out: &Output) -> Result<RunManifest> {
    a.bound_args.single().map_err(validation)?;
    let mut cfg = IsoConfig::new(a.model(), a.n, c.seed, a.bound_args.config(c.seed));
    cfg.pairs = a.pairs;
    cfg.repeats = a.repeats;
    cfg.wl_iterations = a.wl_iterations;
    cfg.wl_bins = a.wl_bins;
    cfg.all_isomorphic = a.all_isomorphic;
    let mut manifest = RunManifest::new("isotest", c.seed, json!({ "cli": snapshot(c, a)?, "resolved": cfg }));
    let rows = manifest.time("isotest", || run_isotest(&cfg, &a.bound))?;
    for r in &rows {
        eprintln!("{:<12} {:.2} +- {:.2} %", r.method.name(), 100.0 * r.mean, 100.0 * r.std);
    }
    match c.format {
        Format::Csv => {
            let flat: Vec<IsoCsvRow> = rows
                .iter()
                .map(|r| IsoCsvRow {
                    method: r.method.name().into(),
                    mean: r.mean,
                    std: r.std,
                    accuracies: r.accuracies.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                })
                .collect();
            out.csv(&mut manifest, "isotest.csv", &rows_to_csv(&flat)?, json!({ "pairs": cfg.pairs, "repeats": cfg.repeats }))?;
        }
        Format::Json => out.json(&mut manifest, "isotest.json", json!({ "rows": rows }))?,
    }
    Ok(manifest)
}

#[derive(Serialize)]
struct BenchCsvRow {
    bound: String,
    n: usize,
    r: Option<String>,
    #[serde(rename = "L")]
    num_projections: Option<usize>,
    repeats: usize,
    mean: f64,
    std: f64,
    median: f64,
}

fn bench(c: &CommonArgs, a: &BenchArgs, out: &Output) -> Result<RunManifest> {
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        repeats: a.repeats,
        bounds: a.bound.clone(),
        rules: a.bound_args.r.iter().map(|r| r.spec()).collect(),
        projections: a.bound_args.num_projections.clone(),
        dim: a.dim,
        seed: c.seed,
        base: a.bound_args.config(c.seed),
    };
    let mut manifest = RunManifest::new("bench", c.seed, json!({ "cli": snapshot(c, a)?, "resolved": cfg }));
    let rows = manifest.time("bench", || run_bench(&cfg))?;
    for r in &rows {
        eprintln!(
            "{:<6} n={:<6} r={:<4} L={:<6} median {:.4} s",
            r.bound.name(),
            r.n,
            r.r.as_deref().unwrap_or("-"),
            r.num_projections.map_or("-".into(), |l| l.to_string()),
            r.median
        );
    }
    match c.format {
        Format::Csv => {
            let flat: Vec<BenchCsvRow> = rows
                .iter()
                .map(|r| BenchCsvRow {
                    bound: r.bound.name().into(),
                    n: r.n,
                    r: r.r.clone(),
                    num_projections: r.num_projections,
                    repeats: r.times.len(),
                    mean: r.mean,
                    std: r.std,
                    median: r.median,
                })
                .collect();
            let times: Vec<&Vec<f64>> = rows.iter().map(|r| &r.times).collect();
            out.csv(&mut manifest, "bench.csv", &rows_to_csv(&flat)?, json!({ "times": times }))?;
        }
        Format::Json => out.json(&mut manifest, "bench.json", json!({ "rows": rows }))?,
    }
    Ok(manifest)
}

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    loss: f64,
}

fn bary(c: &CommonArgs, a: &BaryArgs, out: &Output) -> Result<RunManifest> {
    let targets = a
        .targets
        .iter()
        .map(|p| {
            if a.point_clouds {
                load_point_cloud(p)
            } else {
                Ok(load_space(p, SpaceFormat::from_path(p))
                    .with_context(|| format!("loading {}", p.display()))?
                    .into_base())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let warm = a.warm_start.as_deref().map(load_matrix).transpose()?;
    let n_points = a
        .n_points
        .or(warm.as_ref().map(|w| w.nrows()))
        .unwrap_or(targets[0].len());
    let dim = a.dim.or(warm.as_ref().map(|w| w.ncols())).unwrap_or(2);
    let distance = match a.distance {
        BaryDistanceArg::Tlb => BaryDistance::Tlb,
        BaryDistanceArg::Stlb => BaryDistance::Stlb {
            r: match a.r {
                RuleArg::Midpoint(r) => r,
                RuleArg::MatchSize => n_points,
            },
            num_projections: a.num_projections,
            seed: c.seed,
        },
    };
    let init = match &warm {
        Some(w) => BaryInit::WarmStart {
            points: w.rows().into_iter().map(|r| r.to_vec()).collect(),
        },
        None => BaryInit::RandomNormal { seed: c.seed },
    };
    let cfg = BarycenterConfig {
        n_points,
        dim,
        steps: a.steps,
        step_size: a.step_size,
        restarts: a.restarts,
        distance,
        init,
    };
    let mut config = json!({ "cli": snapshot(c, a)?, "resolved": cfg });
    config["steps"] = json!(cfg.steps);
    config["width"] = json!(cfg.step_size);
    config["restarts"] = json!(cfg.restarts);
    let mut manifest = RunManifest::new("bary", c.seed, config);
    let result = manifest.time("descent", || barycenter::solve(&targets, &cfg))?;
    eprintln!(
        "final loss {:e} (restart {})",
        result.loss_trace.last().copied().unwrap_or(f64::NAN),
        result.best_restart
    );
    let summary = json!({ "best_restart": result.best_restart, "restarts": result.restarts });
    match c.format {
        Format::Csv => {
            out.csv(&mut manifest, "points.csv", &matrix_to_csv(&result.points), summary.clone())?;
            let trace: Vec<TraceRow> = result
                .loss_trace
                .iter()
                .enumerate()
                .map(|(step, &loss)| TraceRow { step, loss })
                .collect();
            out.csv(&mut manifest, "loss_trace.csv", &rows_to_csv(&trace)?, summary)?;
        }
        Format::Json => {
            let points: Vec<Vec<f64>> = result.points.rows().into_iter().map(|r| r.to_vec()).collect();
            let mut doc = summary;
            doc["points"] = json!(points);
            doc["loss_trace"] = json!(result.loss_trace);
            out.json(&mut manifest, "bary.json", doc)?;
        }
    }
    Ok(manifest)
}
