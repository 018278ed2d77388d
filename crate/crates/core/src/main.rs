use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sic_core::canceller::{CancellerState, EstimatorMode};
use sic_core::channel::{scenario, ScenarioConfig};
use sic_core::dnn::TrainConfig;
use sic_core::harness::{self, ExperimentConfig, ExperimentReport};
use sic_core::modem::PskScheme;
use sic_core::pulse::PulseConfig;
use sic_core::Error;

#[derive(Parser)]
#[command(name = "sic", version, about = "Digital self-interference cancellation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train at several window lengths and record loss histories.
    SweepK {
        #[arg(long, default_value = "multipath")]
        scenario: String,
        #[arg(long, default_value = "2,20,50,100", value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, default_value = "qpsk")]
        scheme: String,
        #[command(flatten)]
        common: Common,
    },
    /// Held-out cancellation depth against the least-squares baseline.
    CancelEval {
        #[arg(long, default_value = "validation")]
        scenario: String,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value = "qpsk")]
        scheme: String,
        #[command(flatten)]
        common: Common,
    },
    /// Bit error rate for every scenario and scheme combination.
    Ber {
        /// Comma-separated scenario names.
        #[arg(long, default_value = "room1,room2,outdoor,hallway")]
        scenario: String,
        /// Comma-separated schemes; defaults to all three.
        #[arg(long = "scheme", default_value = "qpsk,16psk,64psk")]
        schemes: String,
        #[arg(long, default_value_t = 32)]
        k: usize,
        /// Payload bytes per frame (8 bits each).
        #[arg(long, default_value_t = 12_500)]
        payload_bytes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Received power with and without self-interference.
    PowerDemo {
        /// SI amplitude relative to the useful signal.
        #[arg(long, default_value_t = 10.0)]
        si_amplitude: f64,
        #[arg(long, default_value = "qpsk")]
        scheme: String,
        #[command(flatten)]
        common: Common,
    },
    /// Probe, train and save a canceller model.
    Train {
        #[arg(long, default_value = "validation")]
        scenario: String,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long, default_value = "qpsk")]
        scheme: String,
        /// Output model file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exchange one payload through a saved model.
    Run {
        #[arg(long, default_value = "validation")]
        scenario: String,
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        payload_bytes: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file; overrides --scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimator: joint-iq, paper-literal or oracle.
    #[arg(long, default_value = "joint-iq")]
    mode: String,
    /// Random bytes per probe frame.
    #[arg(long, default_value_t = 2000)]
    probe_bytes: usize,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

enum Failure {
    Usage(String),
    Experiment(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Experiment(e)
    }
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn resolve_scenario(name: &str, file: &Option<PathBuf>) -> Result<ScenarioConfig, Failure> {
    match file {
        Some(path) => ScenarioConfig::load(path).map_err(usage),
        None => scenario(name).map_err(usage),
    }
}

fn base_config(common: &Common, scenario: ScenarioConfig, scheme: PskScheme) -> Result<ExperimentConfig, Failure> {
    let mode: EstimatorMode = common.mode.parse().map_err(usage)?;
    let train = TrainConfig {
        batch_size: common.batch,
        epochs: common.epochs,
        learning_rate: common.lr,
        seed: common.seed,
    };
    train.validate().map_err(usage)?;
    if common.format == Format::Csv && common.out.is_none() {
        return Err(Failure::Usage("--format csv requires --out".into()));
    }
    Ok(ExperimentConfig {
        scenario,
        scheme,
        mode,
        train,
        pulse: PulseConfig::default(),
        probe_bytes: common.probe_bytes,
        payload_bytes: ExperimentConfig::default().payload_bytes,
        seed: common.seed,
    })
}

fn emit(report: &ExperimentReport, common: &Common) -> Result<(), Failure> {
    if let Some(out) = &common.out {
        report.write_csv(out)?;
    }
    if common.format == Format::Text {
        print!("{}", report.render_text());
    }
    if report.errors.is_empty() {
        Ok(())
    } else {
        let msgs: Vec<String> = report.errors.iter().map(|(c, m)| format!("{c}: {m}")).collect();
        Err(Failure::Experiment(Error::InvalidParameter(format!(
            "{} cell(s) failed: {}",
            msgs.len(),
            msgs.join("; ")
        ))))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SweepK {
            scenario,
            k,
            scheme,
            common,
        } => {
            let sc = resolve_scenario(&scenario, &common.config)?;
            let cfg = base_config(&common, sc, scheme.parse().map_err(usage)?)?;
            if k.is_empty() || k.contains(&0) {
                return Err(Failure::Usage("--k needs positive window lengths".into()));
            }
            let report = harness::sweep_k(&cfg, &k)?;
            emit(&report, &common)
        }
        Command::CancelEval {
            scenario,
            k,
            scheme,
            common,
        } => {
            let sc = resolve_scenario(&scenario, &common.config)?;
            let cfg = base_config(&common, sc, scheme.parse().map_err(usage)?)?;
            emit(&harness::eval_cancellation(&cfg, k)?, &common)
        }
        Command::Ber {
            scenario: names,
            schemes,
            k,
            payload_bytes,
            common,
        } => {
            let scenarios = match &common.config {
                Some(path) => vec![ScenarioConfig::load(path).map_err(usage)?],
                None => names
                    .split(',')
                    .map(|n| scenario(n.trim()).map_err(usage))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let schemes = schemes
                .split(',')
                .map(|s| s.trim().parse::<PskScheme>().map_err(usage))
                .collect::<Result<Vec<_>, _>>()?;
            let mut cfg = base_config(&common, scenarios[0].clone(), schemes[0])?;
            cfg.payload_bytes = payload_bytes;
            emit(&harness::ber_table(&cfg, &scenarios, &schemes, k)?, &common)
        }
        Command::PowerDemo {
            si_amplitude,
            scheme,
            common,
        } => {
            let sc = resolve_scenario("validation", &common.config)?;
            let mut cfg = base_config(&common, sc, scheme.parse().map_err(usage)?)?;
            cfg.payload_bytes = 2000;
            if !si_amplitude.is_finite() || si_amplitude < 0.0 {
                return Err(Failure::Usage("--si-amplitude must be finite and non-negative".into()));
            }
            emit(&harness::power_demo(&cfg, si_amplitude)?, &common)
        }
        Command::Train {
            scenario,
            k,
            scheme,
            model,
            common,
        } => {
            let sc = resolve_scenario(&scenario, &common.config)?;
            let cfg = base_config(&common, sc, scheme.parse().map_err(usage)?)?;
            let (state, _, report) = harness::train_canceller(&cfg, k)?;
            state.save_model(&model)?;
            emit(&report, &common)
        }
        Command::Run {
            scenario,
            model,
            payload_bytes,
            common,
        } => {
            let sc = resolve_scenario(&scenario, &common.config)?;
            let state = CancellerState::load_model(&model)?;
            let mut cfg = base_config(&common, sc, state.scheme)?;
            cfg.payload_bytes = payload_bytes;
            cfg.pulse = state.pulse_cfg;
            emit(&harness::run_trained(&cfg, &state)?, &common)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Experiment(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
