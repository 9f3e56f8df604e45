//! Run manifests and output files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

/// Everything needed to rerun a command: argv, the resolved configuration,
/// the seed and generator, and where the time went.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub subcommand: String,
    pub version: &'static str,
    pub seed: u64,
    pub rng: &'static str,
    pub parallel: bool,
    pub threads: usize,
    pub config: serde_json::Value,
    pub timings: Vec<PhaseTiming>,
    pub outputs: Vec<String>,
    pub converged: bool,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: std::env::args().collect(),
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            rng: gw_bounds::rng::ALGORITHM,
            parallel: gw_bounds::par::is_parallel(),
            threads: thread_count(),
            config,
            timings: Vec::new(),
            outputs: Vec::new(),
            converged: true,
        }
    }

    /// Runs `f` and records its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(PhaseTiming {
            phase: phase.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

fn thread_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| gw_bounds::Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
        .with_context(|| format!("writing {}", path.display()))
}

/// Destination for a command's results: files under `--out` (plus the
/// manifest), or stdout when no directory was given.
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)
                .map_err(|e| gw_bounds::Error::Io {
                    path: d.display().to_string(),
                    msg: e.to_string(),
                })
                .with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Output { dir })
    }

    pub fn is_stdout(&self) -> bool {
        self.dir.is_none()
    }

    /// Writes a CSV file and a `<stem>.meta.json` sidecar pointing at the
    /// manifest.
    pub fn csv(&self, manifest: &mut RunManifest, name: &str, body: &str, meta: serde_json::Value) -> Result<()> {
        let Some(dir) = &self.dir else {
            print!("{body}");
            return Ok(());
        };
        write_file(&dir.join(name), body)?;
        let stem = name.strip_suffix(".csv").unwrap_or(name);
        let sidecar = format!("{stem}.meta.json");
        let mut meta = meta;
        if !meta.is_object() {
            meta = serde_json::json!({ "data": meta });
        }
        meta["file"] = name.into();
        meta["manifest"] = MANIFEST_FILE.into();
        write_file(&dir.join(&sidecar), &serde_json::to_string_pretty(&meta)?)?;
        manifest.outputs.push(name.into());
        manifest.outputs.push(sidecar);
        Ok(())
    }

    /// Writes a JSON document with a `manifest` key.
    pub fn json(&self, manifest: &mut RunManifest, name: &str, doc: serde_json::Value) -> Result<()> {
        let mut doc = doc;
        if !doc.is_object() {
            doc = serde_json::json!({ "data": doc });
        }
        let Some(dir) = &self.dir else {
            println!("{}", serde_json::to_string_pretty(&doc)?);
            return Ok(());
        };
        doc["manifest"] = MANIFEST_FILE.into();
        write_file(&dir.join(name), &serde_json::to_string_pretty(&doc)?)?;
        manifest.outputs.push(name.into());
        Ok(())
    }

    pub fn finish(&self, manifest: &RunManifest) -> Result<()> {
        if let Some(dir) = &self.dir {
            write_file(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(manifest)?)?;
        }
        Ok(())
    }
}

/// Serialises rows as CSV with a header line.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
