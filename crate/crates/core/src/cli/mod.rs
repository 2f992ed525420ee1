//! Command-line front end: argument parsing, config resolution, output
//! directory and manifest handling.
//!
//! Every subcommand takes `--config FILE` and any number of
//! `--set KEY=VALUE` overrides, or `--manifest FILE` to replay an earlier
//! run. Outputs land in `--out` (default `$KAGOME_OUT_DIR`, else
//! `./kagome-out`) next to a `manifest.json` that lists them with digests.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::error::{Error, Result};
use commands::{execute, schema, schemas, RunContext};
use manifest::RunManifest;

pub const OUT_DIR_ENV: &str = "KAGOME_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "kagome", version, about = "Bose-Hubbard simulations of trimerized kagome superlattices")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "kagome-out")]
    out: PathBuf,
    /// Seed for noise and solver starting vectors (default 0, or the replayed manifest's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Replay the config and seed of an earlier run's manifest.json.
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the superlattice potential and list the cell's sites.
    Potential(Common),
    /// Exact diagonalization of a cluster; ground energy and coherences.
    Ed(Common),
    /// Phase-imprint quench on one trimer; alpha/beta time series and spectrum.
    Imprint(Common),
    /// Ground-state coherences over a U/J sweep.
    Sweep(Common),
    /// Diffraction-peak asymmetry versus hold time in the LW lattice.
    Diffract(Common),
    /// Fit nearest-neighbour coherences to a momentum image.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Grid CSV (with its .json sidecar) to fit.
        #[arg(long, value_name = "GRID")]
        input: Option<PathBuf>,
    },
    /// Synthesize a momentum image with optional seeded noise.
    Synth(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Potential(_) => "potential",
            Command::Ed(_) => "ed",
            Command::Imprint(_) => "imprint",
            Command::Sweep(_) => "sweep",
            Command::Diffract(_) => "diffract",
            Command::Fit { .. } => "fit",
            Command::Synth(_) => "synth",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Potential(c)
            | Command::Ed(c)
            | Command::Imprint(c)
            | Command::Sweep(c)
            | Command::Diffract(c)
            | Command::Synth(c) => c,
            Command::Fit { common, .. } => common,
        }
    }
}

/// The clap command with each subcommand's config keys appended to its help.
pub fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for s in schemas() {
        let text = s.help_text();
        cmd = cmd.mut_subcommand(s.command, move |sub| sub.after_help(text));
    }
    cmd
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            for line in summary {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error [{:?}]: {e}", e.kind());
            e.kind().exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<Vec<String>> {
    let name = cli.command.name();
    let common = cli.command.common();
    let schema = schema(name);
    let replay = common.manifest.as_deref().map(RunManifest::read).transpose()?;
    let cfg = match &replay {
        Some(m) => {
            if m.subcommand != name {
                return Err(Error::Config(format!(
                    "manifest is for '{}', not '{name}'",
                    m.subcommand
                )));
            }
            schema.resolve(&m.config_text(), "manifest", &common.set)?
        }
        None => schema.resolve_file(common.config.as_deref(), &common.set)?,
    };
    let seed = cli.seed.or(replay.as_ref().map(|m| m.seed)).unwrap_or(0);
    let input = match &cli.command {
        Command::Fit { input: Some(p), .. } => Some(p.clone()),
        Command::Fit { input: None, .. } => replay
            .as_ref()
            .and_then(|m| m.inputs.iter().find(|d| d.path.ends_with(".csv")))
            .map(|d| PathBuf::from(&d.path)),
        _ => None,
    };

    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let mut ctx = RunContext::new(cli.out.clone(), seed, input);
    for p in [&common.config, &common.manifest].into_iter().flatten() {
        ctx.record_input(p)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    pool.install(|| execute(&cfg, &mut ctx))?;

    let manifest = RunManifest {
        subcommand: name.to_string(),
        config: cfg.values().clone(),
        seed,
        tool: "kagome".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs: ctx.inputs().to_vec(),
        outputs: ctx.output_digests()?,
    };
    let path = manifest.write(&cli.out)?;
    let mut summary = ctx.summary().to_vec();
    summary.push(format!("manifest: {}", path.display()));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_every_config_key() {
        for s in schemas() {
            let mut cmd = command();
            let sub = cmd.find_subcommand_mut(s.command).expect("subcommand exists");
            let help = sub.render_help().to_string();
            for k in &s.keys {
                assert!(help.contains(k.key), "`{} --help` misses {}", s.command, k.key);
            }
        }
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
