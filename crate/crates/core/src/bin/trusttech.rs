//! Experiment runner.
//!
//! Each subcommand resolves its config from the built-in defaults, an
//! optional JSON file (`--config`) and command-line overrides, then writes
//! `config-echo.json`, `summary.json` and CSV artifacts into `--out`.
//! Failures print `{"error": {"kind", "message"}}` and exit nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use trusttech::experiments::{
    gen_data, run_evo, run_gmm, run_nn, run_saddle, run_smooth, run_surfscan, EvoExperiment,
    GmmExperiment, NnExperiment, RunOutput, SmoothExperiment, SurfScanExperiment,
};
use trusttech::{Error, Result};

#[derive(Parser)]
#[command(name = "trusttech", version, about = "Stability-region saddle search and tiered global optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; its fields override the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override any config field, e.g. `--set em.tol=1e-8` (value parsed as
    /// JSON, else taken as a string).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Saddle search between a preset minima pair.
    Saddle {
        #[command(flatten)]
        common: Common,
        /// mb-AB, mb-BC, eckhardt-AB, lj3, leps or heptamer.
        #[arg(long)]
        preset: Option<String>,
    },
    /// EM versus tier-search EM from seeded starts.
    Gmm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Synthetic dataset name or CSV path.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Smoothing census or hierarchy.
    Smooth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        dataset: Option<String>,
        /// Comma-separated census levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Network training (multistart or k-fold).
    Nn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// xor, two-moons or a CSV path.
        #[arg(long)]
        data: Option<String>,
        /// Comma-separated hidden-node counts.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
    },
    /// Evolutionary variants on the multi-well benchmark.
    Evo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Synthetic dataset as CSV plus generating parameters.
    Gendata {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// spherical5, elliptical3 or overlap4.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Critical points from multi-start Newton.
    Surfscan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// muller-brown, eckhardt, leps or lj3.
        #[arg(long)]
        surface: Option<String>,
        #[arg(long)]
        starts: Option<usize>,
    },
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::Config(format!("bad override path {path:?}")));
        }
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            obj.insert((*key).into(), value);
            return Ok(());
        }
        cur = obj.entry(*key).or_insert(Value::Null);
    }
    Ok(())
}

/// Defaults, then the config file, then `--set`, then named flags.
fn resolve<T: Serialize + DeserializeOwned>(
    defaults: Value,
    common: &Common,
    flags: Vec<(&str, Value)>,
) -> Result<T> {
    let mut v = defaults;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        merge(&mut v, file);
    }
    for item in &common.set {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects PATH=VALUE, got {item:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        set_path(&mut v, path, value)?;
    }
    for (path, value) in flags {
        set_path(&mut v, path, value)?;
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("config: {e}")))
}

fn defaults<T: Serialize + Default>() -> Result<Value> {
    Ok(serde_json::to_value(T::default())?)
}

fn flag<T: Serialize>(name: &'static str, v: Option<T>) -> Option<(&'static str, Value)> {
    v.map(|v| (name, serde_json::to_value(v).expect("plain value")))
}

fn run(cmd: Command) -> Result<(PathBuf, RunOutput)> {
    let out = match cmd {
        Command::Saddle { common, preset } => {
            let flags = flag("preset", preset).into_iter().collect();
            let exp = resolve(Value::Object(Map::new()), &common, flags)?;
            (common.out, run_saddle(&exp)?)
        }
        Command::Gmm {
            common,
            seed,
            dataset,
            starts,
        } => {
            let flags = [
                flag("seed", Some(seed)),
                flag("data.dataset", dataset),
                flag("starts", starts),
            ];
            let exp: GmmExperiment =
                resolve(defaults::<GmmExperiment>()?, &common, flags.into_iter().flatten().collect())?;
            (common.out, run_gmm(&exp)?)
        }
        Command::Smooth {
            common,
            seed,
            dataset,
            levels,
            starts,
        } => {
            let flags = [
                flag("seed", Some(seed)),
                flag("data.dataset", dataset),
                flag("levels", levels),
                flag("starts", starts),
            ];
            let exp: SmoothExperiment = resolve(
                defaults::<SmoothExperiment>()?,
                &common,
                flags.into_iter().flatten().collect(),
            )?;
            (common.out, run_smooth(&exp)?)
        }
        Command::Nn {
            common,
            seed,
            data,
            hidden,
        } => {
            let flags = [flag("seed", Some(seed)), flag("data", data), flag("hidden", hidden)];
            let exp: NnExperiment =
                resolve(defaults::<NnExperiment>()?, &common, flags.into_iter().flatten().collect())?;
            (common.out, run_nn(&exp)?)
        }
        Command::Evo { common, seed, runs } => {
            let flags = [flag("seed", Some(seed)), flag("runs", runs)];
            let exp: EvoExperiment =
                resolve(defaults::<EvoExperiment>()?, &common, flags.into_iter().flatten().collect())?;
            (common.out, run_evo(&exp)?)
        }
        Command::Gendata { common, seed, id, n } => {
            let flags = [flag("seed", Some(seed)), flag("id", id), flag("n", n)];
            let exp = resolve(Value::Object(Map::new()), &common, flags.into_iter().flatten().collect())?;
            (common.out, gen_data(&exp)?)
        }
        Command::Surfscan {
            common,
            seed,
            surface,
            starts,
        } => {
            let flags = [flag("seed", Some(seed)), flag("surface", surface), flag("starts", starts)];
            let exp: SurfScanExperiment = resolve(
                defaults::<SurfScanExperiment>()?,
                &common,
                flags.into_iter().flatten().collect(),
            )?;
            (common.out, run_surfscan(&exp)?)
        }
    };
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command).and_then(|(dir, out)| out.write_to(&dir).map(|_| dir)) {
        Ok(dir) => {
            println!("{}", serde_json::json!({ "ok": true, "out": dir }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!(
                "{}",
                serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
            );
            ExitCode::from(if matches!(e, Error::Config(_) | Error::Json(_)) { 2 } else { 1 })
        }
    }
}
