//! Experiment drivers and their reports.
//!
//! Every experiment takes an [`ExperimentConfig`] and returns an
//! [`ExperimentReport`]: one metric per row, written as CSV with the header
//!
//! ```text
//! experiment,seed,scenario,scheme,k,metric,step,value
//! ```
//!
//! `k` and `step` are empty when they do not apply. Values use the shortest
//! representation that parses back to the same `f64` (`inf` and `NaN`
//! included), so a report survives a CSV round trip unchanged.
//!
//! Randomness for cell `i` of an experiment comes from a ChaCha8 generator
//! seeded with the experiment seed on stream `i`; network training seeds are
//! derived the same way. The scenario's own `seed` field is not used here.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canceller::{holdout_split, CancellerState, EstimatorMode, HoldoutEval, SiModel};
use crate::channel::{apply_channel, receive_mixture, relative_power_db, scenario, ScenarioConfig};
use crate::dnn::TrainConfig;
use crate::modem::PskScheme;
use crate::pulse::PulseConfig;
use crate::{power, ComplexSample, Error, Result};

/// BER percentages measured on the hardware testbed, per scenario, for
/// QPSK, 16PSK and 64PSK. Printed next to simulated values for comparison.
pub const TESTBED_BER_PERCENT: [(&str, [f64; 3]); 4] = [
    ("room1", [8.5, 25.0, 37.4]),
    ("room2", [11.2, 28.0, 41.6]),
    ("outdoor", [8.0, 21.0, 37.9]),
    ("hallway", [13.3, 27.5, 45.1]),
];

pub const CSV_HEADER: [&str; 8] = ["experiment", "seed", "scenario", "scheme", "k", "metric", "step", "value"];

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub scheme: String,
    pub k: Option<usize>,
    pub metric: String,
    pub step: Option<usize>,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
struct CsvRecord {
    experiment: String,
    seed: u64,
    scenario: String,
    scheme: String,
    k: Option<usize>,
    metric: String,
    step: Option<usize>,
    value: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    /// Snapshot of the configuration that produced the rows.
    pub config: toml::Table,
    pub rows: Vec<ReportRow>,
    /// Cells that failed, as `(cell label, message)`. The rest of the
    /// experiment still ran.
    pub errors: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, cfg: &ExperimentConfig) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            seed: cfg.seed,
            config: cfg.snapshot(),
            rows: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn push(&mut self, scenario: &str, scheme: &str, k: Option<usize>, metric: &str, step: Option<usize>, value: f64) {
        self.rows.push(ReportRow {
            scenario: scenario.to_string(),
            scheme: scheme.to_string(),
            k,
            metric: metric.to_string(),
            step,
            value,
        });
    }

    /// First row matching the given keys with no `step`.
    pub fn value(&self, scenario: &str, scheme: &str, k: Option<usize>, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.scheme == scheme && r.k == k && r.metric == metric && r.step.is_none())
            .map(|r| r.value)
    }

    /// Values of a stepped metric in step order.
    pub fn series(&self, scenario: &str, scheme: &str, k: Option<usize>, metric: &str) -> Vec<f64> {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.scenario == scenario && r.scheme == scheme && r.k == k && r.metric == metric)
            .filter_map(|r| r.step.map(|s| (s, r.value)))
            .collect();
        rows.sort_by_key(|(s, _)| *s);
        rows.into_iter().map(|(_, v)| v).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER)?;
        }
        for r in &self.rows {
            w.serialize(CsvRecord {
                experiment: self.experiment.clone(),
                seed: self.seed,
                scenario: r.scenario.clone(),
                scheme: r.scheme.clone(),
                k: r.k,
                metric: r.metric.clone(),
                step: r.step,
                value: format!("{}", r.value),
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Parses CSV written by [`ExperimentReport::to_csv`]. The config
    /// snapshot and error list are not part of the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Config(format!("unexpected CSV header {header:?}")));
        }
        let mut report = ExperimentReport {
            experiment: String::new(),
            seed: 0,
            config: toml::Table::new(),
            rows: Vec::new(),
            errors: Vec::new(),
        };
        for rec in rdr.deserialize() {
            let rec: CsvRecord = rec?;
            report.experiment = rec.experiment;
            report.seed = rec.seed;
            let value = rec
                .value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {:?}", rec.value)))?;
            report.rows.push(ReportRow {
                scenario: rec.scenario,
                scheme: rec.scheme,
                k: rec.k,
                metric: rec.metric,
                step: rec.step,
                value,
            });
        }
        Ok(report)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment: {}", self.experiment);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "\n[config]");
        out.push_str(&toml::to_string(&self.config).unwrap_or_default());
        let _ = writeln!(out, "\n{:<11} {:<6} {:>5}  {:<30} {:>5}  value", "scenario", "scheme", "k", "metric", "step");
        for r in &self.rows {
            let k = r.k.map(|k| k.to_string()).unwrap_or_default();
            let step = r.step.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:<11} {:<6} {:>5}  {:<30} {:>5}  {}",
                r.scenario,
                r.scheme,
                k,
                r.metric,
                step,
                display_value(r.value)
            );
        }
        if self.experiment == "ber" {
            out.push_str(&self.render_ber_table());
        }
        for (cell, msg) in &self.errors {
            let _ = writeln!(out, "error in {cell}: {msg}");
        }
        out
    }

    fn render_ber_table(&self) -> String {
        let mut out = String::from("\nBER (%)      simulated: QPSK   16PSK   64PSK | testbed reference: QPSK   16PSK   64PSK\n");
        let mut scenarios: Vec<&str> = Vec::new();
        for r in &self.rows {
            if r.metric == "ber" && !scenarios.contains(&r.scenario.as_str()) {
                scenarios.push(&r.scenario);
            }
        }
        for name in scenarios {
            let _ = write!(out, "{name:<22}");
            for scheme in PskScheme::ALL {
                match self.value(name, scheme.name(), self.k_of(name, scheme), "ber") {
                    Some(v) => {
                        let _ = write!(out, " {:>7.3}", 100.0 * v);
                    }
                    None => out.push_str("       -"),
                }
            }
            out.push_str(" |                   ");
            match TESTBED_BER_PERCENT.iter().find(|(n, _)| *n == name) {
                Some((_, vals)) => {
                    for v in vals {
                        let _ = write!(out, " {v:>7.1}");
                    }
                }
                None => out.push_str("       -       -       -"),
            }
            out.push('\n');
        }
        out
    }

    fn k_of(&self, scenario: &str, scheme: PskScheme) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.scheme == scheme.name() && r.metric == "ber")
            .and_then(|r| r.k)
    }
}

/// Fixed six significant digits for the text report.
fn display_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        format!("{v}")
    } else if (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.5e}")
    }
}

/// Settings shared by all experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub scheme: PskScheme,
    pub mode: EstimatorMode,
    pub train: TrainConfig,
    pub pulse: PulseConfig,
    /// Random bytes per probe frame.
    pub probe_bytes: usize,
    /// Payload bytes per frame in BER runs.
    pub payload_bytes: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: scenario("validation").expect("preset exists"),
            scheme: PskScheme::Qpsk,
            mode: EstimatorMode::JointIq,
            train: TrainConfig::default(),
            pulse: PulseConfig::default(),
            probe_bytes: 2000,
            payload_bytes: 12_500,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn snapshot(&self) -> toml::Table {
        toml::Table::try_from(self).expect("experiment config serializes")
    }

    /// Generator for cell `cell` of an experiment.
    pub fn cell_rng(&self, cell: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(cell);
        rng
    }

    /// Training config for cell `cell`.
    pub fn cell_train(&self, cell: u64) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_mul(1_000_003).wrapping_add(cell),
            ..self.train
        }
    }
}

/// Samples needed to carry one byte: `sps * 8 / bits_per_symbol`.
pub fn samples_per_byte(scheme: PskScheme, sps: usize) -> usize {
    sps * 8 / scheme.bits_per_symbol()
}

/// Aligned probe pairs of one scenario.
pub struct ProbeData {
    pub state: CancellerState,
    pub x: Vec<ComplexSample>,
    pub y: Vec<ComplexSample>,
}

impl ProbeData {
    /// Probes `scenario` and aligns the records. The returned state has
    /// window `window` and is still untrained.
    pub fn collect(
        scenario: &ScenarioConfig,
        scheme: PskScheme,
        pulse: PulseConfig,
        window: usize,
        probe_bytes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut state = CancellerState::new(scheme, pulse, window)?;
        let records = state.probe(scenario, probe_bytes, rng)?;
        let (x, y) = state.collect(&records)?;
        Ok(ProbeData { state, x, y })
    }

    pub fn split(&self) -> usize {
        holdout_split(self.x.len())
    }

    /// Copy of the state with a different window, sharing the alignment.
    pub fn with_window(&self, window: usize) -> Result<CancellerState> {
        let mut s = CancellerState::new(self.state.scheme, self.state.pulse_cfg, window)?;
        s.si_lag = self.state.si_lag;
        Ok(s)
    }

    /// Trains `state` on the first 80% of the pairs and evaluates on the
    /// rest.
    pub fn fit(
        &self,
        state: &mut CancellerState,
        mode: EstimatorMode,
        train: &TrainConfig,
    ) -> Result<(crate::canceller::TrainOutcome, HoldoutEval)> {
        let s = self.split();
        let outcome = state.train(&self.x[..s], &self.y[..s], mode, train)?;
        let eval = state.evaluate_holdout(&self.x, &self.y)?;
        Ok((outcome, eval))
    }
}

/// Trains one estimator per window length on a shared probe record and
/// records per-epoch loss histories.
///
/// Rows per `K`: `loss` (one per epoch, I plus Q mean loss), `final_loss`,
/// `loss_reduction` (first to last epoch, relative), `holdout_db` and
/// `non_learning` (1 when `K` is below the samples carried by one byte).
/// A diverged `K` gets a `diverged_epoch` row instead.
pub fn sweep_k(cfg: &ExperimentConfig, k_values: &[usize]) -> Result<ExperimentReport> {
    if k_values.is_empty() {
        return Err(Error::InvalidParameter("no window lengths given".into()));
    }
    let mut report = ExperimentReport::new("sweep-k", cfg);
    let max_k = *k_values.iter().max().expect("nonempty");
    let probe = ProbeData::collect(&cfg.scenario, cfg.scheme, cfg.pulse, max_k, cfg.probe_bytes, &mut cfg.cell_rng(0))?;
    let spb = samples_per_byte(cfg.scheme, cfg.pulse.sps);
    let (sc, sch) = (cfg.scenario.name.as_str(), cfg.scheme.name());
    for (i, &k) in k_values.iter().enumerate() {
        let mut state = probe.with_window(k)?;
        let k_row = Some(k);
        match probe.fit(&mut state, cfg.mode, &cfg.cell_train(i as u64 + 1)) {
            Ok((outcome, eval)) => {
                let history: Vec<f64> = outcome
                    .i_history
                    .iter()
                    .zip(&outcome.q_history)
                    .map(|(a, b)| a + b)
                    .collect();
                for (epoch, loss) in history.iter().enumerate() {
                    report.push(sc, sch, k_row, "loss", Some(epoch), *loss);
                }
                if let (Some(first), Some(last)) = (history.first(), history.last()) {
                    report.push(sc, sch, k_row, "final_loss", None, *last);
                    report.push(sc, sch, k_row, "loss_reduction", None, (first - last) / first);
                }
                report.push(sc, sch, k_row, "holdout_db", None, eval.cancellation_db);
            }
            Err(Error::Diverged { epoch, loss }) => {
                report.push(sc, sch, k_row, "diverged_epoch", None, epoch as f64);
                report.errors.push((format!("K={k}"), format!("training diverged at epoch {epoch} (loss {loss})")));
            }
            Err(e) => return Err(e),
        }
        report.push(sc, sch, k_row, "non_learning", None, if k < spb { 1.0 } else { 0.0 });
    }
    Ok(report)
}

/// Held-out cancellation depth of the configured estimator at window `k`,
/// next to the least-squares FIR fit on the same data and a zero estimate.
///
/// Rows are prefixed with the estimator: `<mode>.*`, `ls.*` and
/// `untrained.*`, each with `max_abs_residual`, `residual_power` and
/// `cancellation_db`; plus `si_power` and, for networks, `final_loss`.
pub fn eval_cancellation(cfg: &ExperimentConfig, k: usize) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("cancel-eval", cfg);
    let probe = ProbeData::collect(&cfg.scenario, cfg.scheme, cfg.pulse, k, cfg.probe_bytes, &mut cfg.cell_rng(0))?;
    let (sc, sch) = (cfg.scenario.name.as_str(), cfg.scheme.name());
    let push_eval = |report: &mut ExperimentReport, label: &str, e: &HoldoutEval| {
        report.push(sc, sch, Some(k), &format!("{label}.max_abs_residual"), None, e.max_abs_residual);
        report.push(sc, sch, Some(k), &format!("{label}.residual_power"), None, e.residual_power);
        report.push(sc, sch, Some(k), &format!("{label}.cancellation_db"), None, e.cancellation_db);
    };

    let mut state = probe.with_window(k)?;
    let (outcome, eval) = probe.fit(&mut state, cfg.mode, &cfg.cell_train(1))?;
    report.push(sc, sch, Some(k), "si_power", None, eval.si_power);
    push_eval(&mut report, cfg.mode.name(), &eval);
    if let Some(loss) = outcome.final_loss() {
        report.push(sc, sch, Some(k), &format!("{}.final_loss", cfg.mode.name()), None, loss);
    }

    let mut ls = probe.with_window(k)?;
    let (_, ls_eval) = probe.fit(&mut ls, EstimatorMode::Oracle, &cfg.train)?;
    push_eval(&mut report, "ls", &ls_eval);

    let mut zero = probe.with_window(k)?;
    zero.model = Some(SiModel::Oracle {
        taps: vec![ComplexSample::default(); k],
    });
    push_eval(&mut report, "untrained", &zero.evaluate_holdout(&probe.x, &probe.y)?);
    Ok(report)
}

/// Result of one BER cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BerCell {
    pub bit_errors: u64,
    pub bits: u64,
    pub holdout_db: f64,
}

impl BerCell {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

/// Probes and trains on `scenario`, then sends one payload frame from each
/// node and counts bit errors in the remote payload recovered by this node.
/// A scenario whose SI taps are all zero skips probing and cancels nothing.
pub fn ber_cell(
    cfg: &ExperimentConfig,
    scenario: &ScenarioConfig,
    scheme: PskScheme,
    k: usize,
    cell: u64,
) -> Result<BerCell> {
    let mut rng = cfg.cell_rng(cell);
    let (state, holdout_db) = if scenario.si_taps.iter().all(|t| t.norm() == 0.0) {
        let mut s = CancellerState::new(scheme, cfg.pulse, k)?;
        s.model = Some(SiModel::Oracle {
            taps: vec![ComplexSample::default(); k],
        });
        (s, f64::NAN)
    } else {
        let probe = ProbeData::collect(scenario, scheme, cfg.pulse, k, cfg.probe_bytes, &mut rng)?;
        let mut s = probe.with_window(k)?;
        let (_, eval) = probe.fit(&mut s, cfg.mode, &cfg.cell_train(cell))?;
        (s, eval.cancellation_db)
    };
    let tx: Vec<u8> = (0..cfg.payload_bytes).map(|_| rng.random()).collect();
    let remote: Vec<u8> = (0..cfg.payload_bytes).map(|_| rng.random()).collect();
    let rx = receive_mixture(&state.transmit_frame(&tx), &state.transmit_frame(&remote), scenario, &mut rng)?;
    let recovered = state.run_pipeline(&tx, &rx)?;
    Ok(BerCell {
        bit_errors: bit_errors(&recovered, &remote),
        bits: 8 * remote.len() as u64,
        holdout_db,
    })
}

pub fn bit_errors(a: &[u8], b: &[u8]) -> u64 {
    let diff: u64 = a.iter().zip(b).map(|(x, y)| u64::from((x ^ y).count_ones())).sum();
    diff + 8 * a.len().abs_diff(b.len()) as u64
}

/// Bit error rate of the full pipeline for every (scenario, scheme) cell.
/// Cell `i` (scenario-major) draws from generator stream `i + 1`. A failing
/// cell is listed in `errors` and the remaining cells still run.
///
/// Rows per cell: `ber`, `bit_errors`, `bits`, `holdout_db`.
pub fn ber_table(
    cfg: &ExperimentConfig,
    scenarios: &[ScenarioConfig],
    schemes: &[PskScheme],
    k: usize,
) -> Result<ExperimentReport> {
    if scenarios.is_empty() || schemes.is_empty() {
        return Err(Error::InvalidParameter("BER table needs scenarios and schemes".into()));
    }
    if cfg.payload_bytes < 1 {
        return Err(Error::InvalidParameter("payload must hold at least one byte".into()));
    }
    let mut report = ExperimentReport::new("ber", cfg);
    report
        .config
        .insert("scenarios".into(), toml::Value::try_from(scenarios).expect("scenarios serialize"));
    let mut cell = 0u64;
    for sc in scenarios {
        for &scheme in schemes {
            cell += 1;
            match ber_cell(cfg, sc, scheme, k, cell) {
                Ok(r) => {
                    let (n, s) = (sc.name.as_str(), scheme.name());
                    report.push(n, s, Some(k), "ber", None, r.ber());
                    report.push(n, s, Some(k), "bit_errors", None, r.bit_errors as f64);
                    report.push(n, s, Some(k), "bits", None, r.bits as f64);
                    report.push(n, s, Some(k), "holdout_db", None, r.holdout_db);
                }
                Err(e) => report.errors.push((format!("{}/{}", sc.name, scheme), e.to_string())),
            }
        }
    }
    Ok(report)
}

/// Received power with and without self-interference when the SI stream has
/// `si_amplitude` times the useful amplitude. The two streams are
/// independent shaped frames of `cfg.payload_bytes` random bytes.
///
/// Rows: `si_off_db`, `si_on_db`, `gap_db`.
pub fn power_demo(cfg: &ExperimentConfig, si_amplitude: f64) -> Result<ExperimentReport> {
    if !si_amplitude.is_finite() || si_amplitude < 0.0 {
        return Err(Error::InvalidParameter(format!("SI amplitude {si_amplitude} must be finite and non-negative")));
    }
    let mut report = ExperimentReport::new("power-demo", cfg);
    report.config.insert("si_amplitude".into(), toml::Value::Float(si_amplitude));
    let state = CancellerState::new(cfg.scheme, cfg.pulse, 1)?;
    let mut rng = cfg.cell_rng(0);
    let mut frame = || {
        let data: Vec<u8> = (0..cfg.payload_bytes.max(1)).map(|_| rng.random()).collect();
        state.pulse().shape(&crate::modem::modulate_bytes(&data, cfg.scheme).symbols)
    };
    let useful = frame();
    let si: Vec<ComplexSample> = frame().into_iter().map(|v| v * si_amplitude).collect();
    let off = relative_power_db(&useful)?;
    let on = relative_power_db(&crate::channel::mix(&si, &useful)?)?;
    let sch = cfg.scheme.name();
    report.push("", sch, None, "si_off_db", None, off);
    report.push("", sch, None, "si_on_db", None, on);
    report.push("", sch, None, "gap_db", None, on - off);
    Ok(report)
}

/// `|<a, b>| / (|a| |b|)` over the common prefix; 0 when either is zero.
pub fn normalized_cross_correlation(a: &[ComplexSample], b: &[ComplexSample]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let dot: ComplexSample = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let denom = (power(a) * power(b)).sqrt() * n as f64;
    if denom == 0.0 {
        0.0
    } else {
        dot.norm() / denom
    }
}

/// Two-node replay on the validation channel: this node sends bytes
/// `1..=20`, the remote node sends `101..=120`; SI taps `[1, 1]`, useful taps
/// `[1]`, and the canceller uses the fixed imperfect estimate `[1.1, 0.9]`.
///
/// Rows: `ncc_samples` (recovered vs true useful stream), `ncc_symbols`
/// (matched-filter outputs), `byte_errors`, `residual_db` (SI power over
/// residual SI power).
pub fn validation_replay(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("validation-replay", cfg);
    let mut sc = scenario("validation")?;
    sc.useful_taps = vec![ComplexSample::new(1.0, 0.0)];
    let one = ComplexSample::new(1.0, 0.0);
    sc.si_taps = vec![one, one];
    let mut state = CancellerState::new(cfg.scheme, cfg.pulse, 2)?;
    state.si_lag = state.preamble().channel_lag(&sc.si_taps);
    state.model = Some(SiModel::Oracle {
        taps: vec![ComplexSample::new(1.1, 0.0), ComplexSample::new(0.9, 0.0)],
    });

    let tx: Vec<u8> = (1..=20).collect();
    let remote: Vec<u8> = (101..=120).collect();
    let x = state.transmit_frame(&tx);
    let u = state.transmit_frame(&remote);
    let mut rng = cfg.cell_rng(0);
    let y = receive_mixture(&x, &u, &sc, &mut rng)?;
    let si = apply_channel(&x, &sc, &mut rng)?;

    let mut x_ext = x.clone();
    x_ext.resize(y.len(), ComplexSample::default());
    let y_hat = state.estimate_stream(&x_ext)?;
    let recovered = crate::canceller::cancel(&y, &y_hat)?;
    let residual: Vec<ComplexSample> = si
        .iter()
        .zip(&y_hat)
        .map(|(a, b)| a - b)
        .collect();

    let n_symbols = cfg.scheme.symbols_for_bytes(remote.len());
    let body = state.preamble().len();
    let sym_rec = state.pulse().recover(&recovered[body..], n_symbols);
    let sym_true = state.pulse().recover(&u[body..], n_symbols);
    let bytes = state.demodulate(&recovered, remote.len())?;

    let sch = cfg.scheme.name();
    report.push("validation", sch, Some(2), "ncc_samples", None, normalized_cross_correlation(&recovered, &u));
    report.push("validation", sch, Some(2), "ncc_symbols", None, normalized_cross_correlation(&sym_rec, &sym_true));
    report.push("validation", sch, Some(2), "byte_errors", None, bytes.iter().zip(&remote).filter(|(a, b)| a != b).count() as f64);
    report.push(
        "validation",
        sch,
        Some(2),
        "residual_db",
        None,
        crate::canceller::cancellation_db(&si, &residual)?,
    );
    Ok(report)
}

/// Trains a canceller on `cfg.scenario` at window `k` and returns it with
/// its held-out evaluation.
pub fn train_canceller(cfg: &ExperimentConfig, k: usize) -> Result<(CancellerState, HoldoutEval, ExperimentReport)> {
    let probe = ProbeData::collect(&cfg.scenario, cfg.scheme, cfg.pulse, k, cfg.probe_bytes, &mut cfg.cell_rng(0))?;
    let mut state = probe.with_window(k)?;
    let (outcome, eval) = probe.fit(&mut state, cfg.mode, &cfg.cell_train(1))?;
    let mut report = ExperimentReport::new("train", cfg);
    let (sc, sch) = (cfg.scenario.name.as_str(), cfg.scheme.name());
    report.push(sc, sch, Some(k), "holdout_db", None, eval.cancellation_db);
    report.push(sc, sch, Some(k), "residual_power", None, eval.residual_power);
    if let Some(loss) = outcome.final_loss() {
        report.push(sc, sch, Some(k), "final_loss", None, loss);
    }
    Ok((state, eval, report))
}

/// Runs one payload exchange through a trained canceller on
/// `cfg.scenario`. Rows: `ber`, `bit_errors`, `bits`, `byte_errors`.
pub fn run_trained(cfg: &ExperimentConfig, state: &CancellerState) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("run", cfg);
    let mut rng = cfg.cell_rng(0);
    let tx: Vec<u8> = (0..cfg.payload_bytes).map(|_| rng.random()).collect();
    let remote: Vec<u8> = (0..cfg.payload_bytes).map(|_| rng.random()).collect();
    let rx = receive_mixture(&state.transmit_frame(&tx), &state.transmit_frame(&remote), &cfg.scenario, &mut rng)?;
    let recovered = state.run_pipeline(&tx, &rx)?;
    let errors = bit_errors(&recovered, &remote);
    let bits = 8 * remote.len() as u64;
    let (sc, sch) = (cfg.scenario.name.as_str(), state.scheme.name());
    let k = Some(state.window);
    report.push(sc, sch, k, "ber", None, errors as f64 / bits as f64);
    report.push(sc, sch, k, "bit_errors", None, errors as f64);
    report.push(sc, sch, k, "bits", None, bits as f64);
    report.push(sc, sch, k, "byte_errors", None, recovered.iter().zip(&remote).filter(|(a, b)| a != b).count() as f64);
    Ok(report)
}
