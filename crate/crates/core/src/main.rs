use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use crowdgate::experiments::{
    filter_study, run_allxy, run_sequence, run_synthesis, sweep_gate_time, sweep_robustness, sweep_speed_limit, wahwah_study, Assessment,
    ExperimentConfig, SynthesisRecord,
};
use crowdgate::linalg::{C64, ONE};
use crowdgate::metrics::SimResult;
use crowdgate::propagator::{state_trajectory, write_trajectory_csv};
use crowdgate::pulses::write_waveform_csv;
use crowdgate::Error;

#[derive(Parser)]
#[command(name = "crowdgate", version, about = "Pulse synthesis for simultaneous gates on crowded transmon qutrits")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; the reference device when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for records and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 when the study misses its acceptance thresholds.
    #[arg(long = "assert", global = true)]
    assert_thresholds: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the configured gate.
    Synthesize {
        /// Synthesize every AllXY pair instead.
        #[arg(long)]
        allxy: bool,
    },
    /// Error versus gate time for each pulse strategy.
    SweepTime,
    /// Crowding-frequency by gate-time scan and speed-limit fit.
    SpeedLimit,
    /// Error landscape of one pulse over device deviations.
    Robustness,
    /// WahWah single-qubit gates versus normalized gate time.
    Wahwah,
    /// Filtered and retuned pulse errors versus gate time.
    FilterStudy,
    /// Composite gate built from the configured sequence.
    Sequence,
    /// Waveform (and optionally state trajectory) CSV of a stored result.
    ExportWaveform {
        /// A `synthesis.json` record or a bare simulation result.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        trajectory: bool,
    },
}

enum Failure {
    Config(String),
    Run(String),
    Missed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::reference(0),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(assessment: Assessment, enforce: bool) -> Result<(), Failure> {
    for line in &assessment.lines {
        println!("{line}");
    }
    if enforce && !assessment.passed {
        return Err(Failure::Missed);
    }
    Ok(())
}

fn export(input: &Path, dir: &Path, dt: f64, trajectory: bool) -> Result<(), Failure> {
    let text = std::fs::read_to_string(input).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let result: SimResult = match serde_json::from_str::<SynthesisRecord>(&text) {
        Ok(r) => r.result,
        Err(_) => serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?,
    };
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let path = dir.join("waveform.csv");
    write_waveform_csv(&result.pulse, dt, BufWriter::new(File::create(&path).map_err(Error::from)?))?;
    println!("wrote {}", path.display());
    if trajectory {
        let mut psi = nalgebra::SVector::<C64, 9>::zeros();
        psi[0] = ONE;
        let every = (result.grid.steps / 400).max(1);
        let points = state_trajectory(&result.pulse, &result.params, &result.grid, &psi, every);
        let path = dir.join("trajectory.csv");
        write_trajectory_csv(&points, BufWriter::new(File::create(&path).map_err(Error::from)?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let out = cfg.output.dir.clone();
    let dir = Some(out.as_path());
    let enforce = cli.common.assert_thresholds;
    match cli.command {
        Command::Synthesize { allxy: false } => {
            let r = run_synthesis(&cfg, dir)?;
            println!("gate error {:.4e}  leakage {:.4e}  seed {}  config {}", r.result.gate_error, r.result.leakage, r.seed, r.config_hash);
            report(r.assess(), enforce)
        }
        Command::Synthesize { allxy: true } => {
            let records = run_allxy(&cfg, dir)?;
            let mut a = Assessment::default();
            for r in &records {
                let t = r.result.target;
                a.check(r.result.gate_error <= 1e-4, format!("{} {}: gate error {:.3e}", t.theta1(), t.theta2(), r.result.gate_error));
            }
            report(a, enforce)
        }
        Command::SweepTime => report(sweep_gate_time(&cfg, dir)?.assess(), enforce),
        Command::SpeedLimit => {
            let r = sweep_speed_limit(&cfg, dir)?;
            for l in &r.limits {
                match l.t_min {
                    Some(t) => println!("{:>6.1} MHz: t_min {t:.2} ns", l.crowding_mhz),
                    None => println!("{:>6.1} MHz: no crossing", l.crowding_mhz),
                }
            }
            report(r.assess(), enforce)
        }
        Command::Robustness => {
            let r = sweep_robustness(&cfg, dir)?;
            println!("nominal gate error {:.4e}", r.nominal.gate_error);
            report(r.assess(), enforce)
        }
        Command::Wahwah => report(wahwah_study(&cfg, dir)?.assess(), enforce),
        Command::FilterStudy => report(filter_study(&cfg, dir)?.assess(), enforce),
        Command::Sequence => report(run_sequence(&cfg, dir)?.assess(), enforce),
        Command::ExportWaveform { input, trajectory } => export(&input, &out, cfg.output.waveform_dt_ns, trajectory),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Missed) => {
            eprintln!("acceptance thresholds missed");
            ExitCode::from(3)
        }
    }
}
