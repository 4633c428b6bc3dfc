//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::SimConfig;
use crate::dataset_io::{
    check_dataset, export_dataset, ingest_annotated, render_preview, shape_models_from_masks,
};
use crate::error::{Error, Result};
use crate::population_sim::{cell_conditioning, simulate, SimResources};
use crate::stage_model::{estimate_transition_model, read_sequences_csv};

#[derive(Debug, Parser)]
#[command(
    name = "cellsynth",
    version,
    about = "Synthetic fluorescence microscopy of dividing nuclei"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a stage-transition model from a CSV of stage sequences.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build per-stage shape models from binary masks listed in masks.csv.
    BuildSsm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment annotated snippets and estimate all models.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation and export the dataset.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the conditioning triplet of every cell in every frame.
    ExportConditioning {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a montage of selected frames of an exported dataset.
    Preview {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        frames: Vec<usize>,
        /// Defaults to <dataset>/preview.png.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check masks, tracks and stages of an exported dataset.
    Check {
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg = SimConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Estimate { input, out } => {
            let file = std::fs::File::open(&input).map_err(|e| Error::io(&input, e))?;
            let model = estimate_transition_model(&read_sequences_csv(file)?)?;
            write_json(&out, &model)?;
        }
        Command::BuildSsm { input, out } => {
            let set = shape_models_from_masks(&input)?;
            write_string(&out, &set.to_json()?)?;
        }
        Command::Ingest { input, out } => {
            let res = ingest_annotated(&input)?;
            create_dir(&out)?;
            write_json(&out.join("transition.json"), &res.transition)?;
            write_string(&out.join("ssm.json"), &res.shapes.to_json()?)?;
            write_json(&out.join("intensity.json"), &res.intensity)?;
            println!(
                "{} snippets, {} skipped, models for stages {:?}",
                res.n_snippets,
                res.skipped.len(),
                res.shapes.stages().map(|s| s.value()).collect::<Vec<_>>()
            );
        }
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let sim = simulate(&cfg, &SimResources::from_config(&cfg)?)?;
            let m = export_dataset(&sim, &out)?;
            println!(
                "{} frames, {} cells, {} divisions written to {}",
                m.n_frames,
                m.n_cells,
                m.n_divisions,
                out.display()
            );
        }
        Command::ExportConditioning { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let sim = simulate(&cfg, &SimResources::from_config(&cfg)?)?;
            create_dir(&out)?;
            let mut keys = Vec::new();
            for tr in &sim.tracks {
                for f in &tr.frames {
                    if let Some(p) = cell_conditioning(tr.id, f.frame, f, cfg.seed)? {
                        let key = format!("{}_{}", tr.id, f.frame);
                        p.conditioning.write_triplet(&out, &key)?;
                        keys.push(key);
                    }
                }
            }
            write_json(&out.join("conditioning.json"), &keys)?;
            println!(
                "{} conditioning triplets written to {}",
                keys.len(),
                out.display()
            );
        }
        Command::Preview {
            dataset,
            frames,
            out,
        } => {
            let out = out.unwrap_or_else(|| dataset.join("preview.png"));
            render_preview(&dataset, &frames, &out)?;
        }
        Command::Check { dataset } => {
            let violations = check_dataset(&dataset)?;
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                return Ok(1);
            }
            println!("ok");
        }
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the command. Returns 0 on
/// success, 2 on usage or validation errors, 1 on other failures.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}
