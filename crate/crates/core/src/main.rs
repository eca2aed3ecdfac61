use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use myelin::analysis::snapshot::{write_snapshot, Snapshot, SnapshotFormat};
use myelin::analysis::verify::{run_verification, VerifyOptions};
use myelin::network::TrainEvent;
use myelin::{generate_dataset, load_config, read_dataset, write_dataset, Error, Exec, Network, Result, SimConfig};

#[derive(Parser, Debug)]
#[command(name = "myelin", version, about = "Spiking network with learned synaptic delays")]
struct Cli {
    /// Config file of `key = value` lines; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed`; also seeds dataset generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Require freeze_c > B_minus.
    #[arg(long, global = true)]
    strict_freeze: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a moving-dots dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train until every feature freezes or the epoch budget runs out.
    Train {
        /// Dataset file; generated from the seed when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        max_epochs: usize,
        /// Also snapshot the kernels after every k-th epoch.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Check the delay-rule convergence properties and print a table.
    Verify {
        /// Also write the report and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        scenarios: usize,
        #[arg(long, default_value_t = 500)]
        repetitions: usize,
    },
}

#[derive(Serialize)]
struct Manifest {
    command: Vec<String>,
    seed: u64,
    config: String,
    artifacts: Vec<PathBuf>,
    duration_secs: f64,
    epochs_run: Option<usize>,
    freeze_epochs: Option<Vec<Option<usize>>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if cli.strict_freeze {
        cfg.strict_freeze = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn save_snapshot(snap: &Snapshot, stem: &Path, cfg: &SimConfig, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    for (format, ext) in [(SnapshotFormat::Numeric, "json"), (SnapshotFormat::Svg, "svg")] {
        let path = stem.with_extension(ext);
        write_snapshot(snap, &path, format, cfg.w_min, cfg.w_max)?;
        artifacts.push(path);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let start = Instant::now();
    let cfg = resolve_config(&cli)?;
    let argv: Vec<String> = std::env::args().collect();
    let mut manifest = Manifest {
        command: argv,
        seed: cfg.rng_seed,
        config: cfg.to_text(),
        artifacts: vec![],
        duration_secs: 0.0,
        epochs_run: None,
        freeze_epochs: None,
    };
    let mut code = ExitCode::SUCCESS;

    let manifest_path = match &cli.command {
        Command::GenData { out } => {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            let ds = generate_dataset(&cfg, cfg.rng_seed);
            write_dataset(&ds, out)?;
            log::info!("wrote {} stimuli to {}", ds.len(), out.display());
            manifest.artifacts.push(out.clone());
            let mut name = out.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        }
        Command::Train {
            dataset,
            out,
            max_epochs,
            snapshot_every,
        } => {
            if *snapshot_every == Some(0) {
                return Err(Error::Argument("--snapshot-every must be >= 1".into()));
            }
            create_dir(out)?;
            let ds = match dataset {
                Some(path) => read_dataset(path)?,
                None => generate_dataset(&cfg, cfg.rng_seed),
            };
            let mut net = Network::build(&cfg)?;
            let snap_dir = out.join("snapshots");
            if snapshot_every.is_some() {
                create_dir(&snap_dir)?;
            }
            let mut epoch_snaps = Vec::new();
            let summary = net.train_with(&ds, *max_epochs, |ev| {
                if let TrainEvent::EpochDone { epoch, network } = ev {
                    log::info!("epoch {epoch}: frozen {:?}", network.frozen());
                    if snapshot_every.is_some_and(|k| epoch % k == 0) {
                        epoch_snaps.push((epoch, Snapshot::of(network)));
                    }
                }
            })?;
            for (epoch, snap) in &epoch_snaps {
                save_snapshot(snap, &snap_dir.join(format!("epoch-{epoch:04}")), &cfg, &mut manifest.artifacts)?;
            }
            save_snapshot(&Snapshot::of(&net), &out.join("snapshot"), &cfg, &mut manifest.artifacts)?;
            let summary_path = out.join("summary.json");
            write_json(&summary_path, &summary)?;
            manifest.artifacts.push(summary_path);
            log::info!(
                "{} epochs, all frozen: {}, freeze epochs {:?}",
                summary.epochs_run,
                summary.all_frozen,
                summary.freeze_epochs
            );
            manifest.epochs_run = Some(summary.epochs_run);
            manifest.freeze_epochs = Some(summary.freeze_epochs);
            out.join("manifest.json")
        }
        Command::Verify {
            out,
            scenarios,
            repetitions,
        } => {
            let opts = VerifyOptions {
                seed: cfg.rng_seed,
                scenarios: *scenarios,
                repetitions: *repetitions,
                ..VerifyOptions::default()
            };
            let report = run_verification(&cfg, opts, Exec::default())?;
            print!("{}", report.table());
            if !report.passed() {
                for row in report.failures() {
                    log::error!("{}: {}", row.name, row.status);
                }
                code = ExitCode::FAILURE;
            }
            match out {
                Some(dir) => {
                    create_dir(dir)?;
                    let path = dir.join("verify.json");
                    write_json(&path, &report)?;
                    manifest.artifacts.push(path);
                    dir.join("manifest.json")
                }
                None => return Ok(code),
            }
        }
    };

    manifest.duration_secs = start.elapsed().as_secs_f64();
    write_json(&manifest_path, &manifest)?;
    Ok(code)
}
