//! Discrete LTI simulation of the stimulated network, output signal power
//! and the postictal suppression index (PSI).
//!
//! One simulation step is one EEG sample, so at the default 200 Hz a
//! 1.28 s window is 256 steps and the 3.84 s guard around the seizure
//! endpoint is 768 steps (384 on each side). The EEG proxy is the squared
//! state norm `‖x(k)‖²`, which makes the total output power of a unit impulse
//! at node `i` equal to that node's average controllability.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::ConnectomeMatrix;
use crate::control::{self, ControlError};

pub const DEFAULT_SAMPLING_RATE: f64 = 200.0;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("system is unstable: spectral radius {0} >= 1")]
    Unstable(f64),
    #[error("initial state has {got} entries, system has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("control node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("input amplitude at step {0} is not finite")]
    NonFiniteInput(usize),
    #[error("need at least one simulation step")]
    NoSteps,
    #[error("sample range {start}..{end} invalid for trace of length {len}")]
    BadRange { start: usize, end: usize, len: usize },
    #[error("invalid PSI configuration: {0}")]
    BadConfig(String),
    #[error("trace sampled at {trace} Hz but PSI configured for {config} Hz")]
    SamplingRateMismatch { trace: f64, config: f64 },
    #[error("trace has no seizure endpoint marker")]
    NoEndpoint,
    #[error("trace of {len} samples too short: PSI windows need samples {needed_start}..{needed_end}")]
    TraceTooShort {
        len: usize,
        needed_start: i64,
        needed_end: usize,
    },
    #[error("seizure-phase power is zero; PSI undefined")]
    ZeroSeizurePower,
    #[error("stimulus amplitude is zero")]
    ZeroAmplitude,
    #[error("output never fell below {fraction} of its peak within {steps} steps")]
    NoDecay { fraction: f64, steps: usize },
    #[error("impulse response did not settle within {0} steps")]
    NotSettled(usize),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Scalar input `u(k)` broadcast to every node in `control_nodes`
/// (the nonzero rows of `B`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSchedule {
    pub control_nodes: Vec<usize>,
    pub samples: BTreeMap<usize, f64>,
}

impl InputSchedule {
    pub fn new(control_nodes: Vec<usize>) -> Self {
        Self {
            control_nodes,
            samples: BTreeMap::new(),
        }
    }

    /// Single pulse of `amplitude` at `k = 0`.
    pub fn impulse(control_nodes: Vec<usize>, amplitude: f64) -> Self {
        Self::train(control_nodes, amplitude, 1)
    }

    /// Constant `amplitude` for `k = 0 .. len-1`.
    pub fn train(control_nodes: Vec<usize>, amplitude: f64, len: usize) -> Self {
        let mut s = Self::new(control_nodes);
        for k in 0..len {
            s.samples.insert(k, amplitude);
        }
        s
    }

    pub fn at(&self, k: usize) -> f64 {
        self.samples.get(&k).copied().unwrap_or(0.0)
    }

    /// One past the last step with nonzero input.
    pub fn duration(&self) -> usize {
        self.samples
            .iter()
            .rev()
            .find(|(_, &u)| u != 0.0)
            .map_or(0, |(&k, _)| k + 1)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            control_nodes: self.control_nodes.clone(),
            samples: self.samples.iter().map(|(&k, &u)| (k, alpha * u)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Samples are signal amplitudes; instantaneous power is their square.
    Amplitude,
    /// Samples already are instantaneous power (e.g. `‖x(k)‖²`).
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub sampling_rate: f64,
    pub samples: Vec<f64>,
    pub kind: SampleKind,
    pub seizure_end_index: Option<usize>,
    /// Input `u(k)` per sample, if the trace came from a simulation.
    pub inputs: Option<Vec<f64>>,
    /// `n × T` state history, column `k` is `x(k)`.
    pub state_history: Option<DMatrix<f64>>,
}

impl SignalTrace {
    pub fn from_power(samples: Vec<f64>, sampling_rate: f64) -> Self {
        Self {
            sampling_rate,
            samples,
            kind: SampleKind::Power,
            seizure_end_index: None,
            inputs: None,
            state_history: None,
        }
    }

    pub fn from_amplitude(samples: Vec<f64>, sampling_rate: f64) -> Self {
        Self {
            kind: SampleKind::Amplitude,
            ..Self::from_power(samples, sampling_rate)
        }
    }

    pub fn with_seizure_end(mut self, index: usize) -> Self {
        self.seizure_end_index = Some(index);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn instantaneous_power(&self, k: usize) -> f64 {
        match self.kind {
            SampleKind::Amplitude => self.samples[k] * self.samples[k],
            SampleKind::Power => self.samples[k],
        }
    }

    /// Amplitude trace of a single node's activity, if the state history
    /// was recorded.
    pub fn node_output(&self, node: usize) -> Option<SignalTrace> {
        let states = self.state_history.as_ref()?;
        if node >= states.nrows() {
            return None;
        }
        Some(SignalTrace {
            samples: states.row(node).iter().copied().collect(),
            kind: SampleKind::Amplitude,
            state_history: None,
            ..self.clone()
        })
    }

    /// Writes `k,u,output` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), DynamicsError> {
        writeln!(w, "k,u,output")?;
        for (k, s) in self.samples.iter().enumerate() {
            let u = self
                .inputs
                .as_ref()
                .and_then(|i| i.get(k).copied())
                .unwrap_or(0.0);
            writeln!(w, "{k},{u},{s}")?;
        }
        Ok(())
    }
}

/// Runs `x(k+1) = A x(k) + B u(k)` for `steps` steps from `x0`.
///
/// The trace holds `x(0) ..= x(steps)`, i.e. `steps + 1` samples of
/// `‖x(k)‖²`, and the full state history.
pub fn simulate_lti(
    m: &ConnectomeMatrix,
    schedule: &InputSchedule,
    x0: &DVector<f64>,
    steps: usize,
) -> Result<SignalTrace, DynamicsError> {
    let n = m.n();
    if !m.is_stable() {
        return Err(DynamicsError::Unstable(m.spectral_radius()));
    }
    if steps == 0 {
        return Err(DynamicsError::NoSteps);
    }
    if x0.len() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if let Some(&node) = schedule.control_nodes.iter().find(|&&i| i >= n) {
        return Err(DynamicsError::NodeOutOfRange { node, n });
    }
    if let Some((&k, _)) = schedule.samples.iter().find(|(_, u)| !u.is_finite()) {
        return Err(DynamicsError::NonFiniteInput(k));
    }

    let a = m.adjacency();
    let mut states = DMatrix::<f64>::zeros(n, steps + 1);
    let mut inputs = vec![0.0; steps + 1];
    let mut x = x0.clone();
    states.set_column(0, &x);
    for k in 0..steps {
        let u = schedule.at(k);
        inputs[k] = u;
        let mut next = a * &x;
        if u != 0.0 {
            for &i in &schedule.control_nodes {
                next[i] += u;
            }
        }
        x = next;
        states.set_column(k + 1, &x);
    }
    let samples = states.column_iter().map(|c| c.norm_squared()).collect();
    Ok(SignalTrace {
        sampling_rate: DEFAULT_SAMPLING_RATE,
        samples,
        kind: SampleKind::Power,
        seizure_end_index: None,
        inputs: Some(inputs),
        state_history: Some(states),
    })
}

/// Total signal power `Σ ‖s(k)‖²` over samples `start..end`.
pub fn signal_power(trace: &SignalTrace, start: usize, end: usize) -> Result<f64, DynamicsError> {
    if start > end || end > trace.len() {
        return Err(DynamicsError::BadRange {
            start,
            end,
            len: trace.len(),
        });
    }
    Ok((start..end).map(|k| trace.instantaneous_power(k)).sum())
}

/// Total output power of a unit impulse at `node` from rest, simulated
/// until a step adds less than `tol` relative to the running total.
///
/// For a stable system this is the Gramian trace for that node.
pub fn impulse_output_power(
    m: &ConnectomeMatrix,
    node: usize,
    tol: f64,
    cap: usize,
) -> Result<f64, DynamicsError> {
    let n = m.n();
    if node >= n {
        return Err(DynamicsError::NodeOutOfRange { node, n });
    }
    if !m.is_stable() {
        return Err(DynamicsError::Unstable(m.spectral_radius()));
    }
    let a = m.adjacency();
    let mut x = DVector::<f64>::zeros(n);
    x[node] = 1.0;
    let mut total = 0.0;
    for _ in 0..cap {
        let p = x.norm_squared();
        total += p;
        if p < tol * total.max(1.0) {
            return Ok(total);
        }
        x = a * x;
    }
    Err(DynamicsError::NotSettled(cap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiConfig {
    pub window_seconds: f64,
    pub window_count: usize,
    pub guard_seconds: f64,
    pub sampling_rate: f64,
}

impl Default for PsiConfig {
    fn default() -> Self {
        Self {
            window_seconds: 1.28,
            window_count: 3,
            guard_seconds: 3.84,
            sampling_rate: DEFAULT_SAMPLING_RATE,
        }
    }
}

fn whole_samples(seconds: f64, rate: f64, what: &str) -> Result<usize, DynamicsError> {
    let exact = seconds * rate;
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-6 {
        return Err(DynamicsError::BadConfig(format!(
            "{what} of {seconds} s is {exact} samples at {rate} Hz, not a whole number"
        )));
    }
    Ok(rounded as usize)
}

impl PsiConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return Err(DynamicsError::BadConfig("sampling rate must be positive".into()));
        }
        if !(self.window_seconds > 0.0) || self.window_count == 0 {
            return Err(DynamicsError::BadConfig(
                "need at least one window of positive length".into(),
            ));
        }
        if !(self.guard_seconds >= 0.0) {
            return Err(DynamicsError::BadConfig("guard must be nonnegative".into()));
        }
        if self.window_samples()? == 0 {
            return Err(DynamicsError::BadConfig("window shorter than one sample".into()));
        }
        self.guard_samples()?;
        Ok(())
    }

    pub fn window_samples(&self) -> Result<usize, DynamicsError> {
        whole_samples(self.window_seconds, self.sampling_rate, "window")
    }

    pub fn guard_samples(&self) -> Result<usize, DynamicsError> {
        whole_samples(self.guard_seconds, self.sampling_rate, "guard")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiResult {
    /// PSI on the unit interval, after clamping.
    pub psi: f64,
    /// `1 - termination / seizure` before clamping.
    pub raw_psi: f64,
    /// Set when the raw value was negative and clamped to zero.
    pub clamped: bool,
    /// Mean per-window power over the seizure-side windows.
    pub seizure_power: f64,
    /// Mean per-window power over the termination-side windows.
    pub termination_power: f64,
    pub seizure_windows: Vec<(usize, usize)>,
    pub termination_windows: Vec<(usize, usize)>,
}

impl PsiResult {
    /// PSI on the 0-100 scale used clinically.
    pub fn percent(&self) -> f64 {
        100.0 * self.psi
    }
}

/// Postictal suppression index `1 - P_termination / P_seizure`.
///
/// Each power is the mean over `window_count` contiguous windows. The
/// seizure-side windows end where the guard interval before the endpoint
/// starts; the termination-side windows start where the guard after the
/// endpoint ends. The guard is split evenly around the endpoint.
pub fn compute_psi(trace: &SignalTrace, cfg: &PsiConfig) -> Result<PsiResult, DynamicsError> {
    cfg.validate()?;
    if (trace.sampling_rate - cfg.sampling_rate).abs() > 1e-9 * cfg.sampling_rate {
        return Err(DynamicsError::SamplingRateMismatch {
            trace: trace.sampling_rate,
            config: cfg.sampling_rate,
        });
    }
    let end = trace.seizure_end_index.ok_or(DynamicsError::NoEndpoint)?;
    let w = cfg.window_samples()?;
    let guard = cfg.guard_samples()?;
    let before = guard / 2;
    let after = guard - before;
    let span = w * cfg.window_count;

    let seizure_stop = end as i64 - before as i64;
    let seizure_start = seizure_stop - span as i64;
    let term_start = end + after;
    let term_stop = term_start + span;
    if seizure_start < 0 || term_stop > trace.len() {
        return Err(DynamicsError::TraceTooShort {
            len: trace.len(),
            needed_start: seizure_start,
            needed_end: term_stop,
        });
    }
    let seizure_start = seizure_start as usize;

    let windows = |from: usize| -> Vec<(usize, usize)> {
        (0..cfg.window_count)
            .map(|i| (from + i * w, from + (i + 1) * w))
            .collect()
    };
    let seizure_windows = windows(seizure_start);
    let termination_windows = windows(term_start);
    let mean_power = |ws: &[(usize, usize)]| -> Result<f64, DynamicsError> {
        let mut total = 0.0;
        for &(a, b) in ws {
            total += signal_power(trace, a, b)?;
        }
        Ok(total / ws.len() as f64)
    };
    let seizure_power = mean_power(&seizure_windows)?;
    let termination_power = mean_power(&termination_windows)?;
    if seizure_power <= 0.0 {
        return Err(DynamicsError::ZeroSeizurePower);
    }
    let raw_psi = 1.0 - termination_power / seizure_power;
    let clamped = raw_psi < 0.0;
    Ok(PsiResult {
        psi: raw_psi.max(0.0),
        raw_psi,
        clamped,
        seizure_power,
        termination_power,
        seizure_windows,
        termination_windows,
    })
}

/// Stimulation protocol for [`ect_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EctProtocol {
    /// Length of the constant stimulus train in steps; `1` is an impulse.
    pub stimulus_steps: usize,
    /// Nodes receiving the charge; `None` means every node.
    pub control_nodes: Option<Vec<usize>>,
    /// The endpoint is the first step after the peak where `‖x(k)‖²` drops
    /// below this fraction of the peak.
    pub endpoint_fraction: f64,
    /// Constant background power added to the EEG proxy. It is what
    /// remains in the termination windows once the network has relaxed.
    pub background_power: f64,
}

impl Default for EctProtocol {
    fn default() -> Self {
        Self {
            stimulus_steps: 2048,
            control_nodes: None,
            endpoint_fraction: 0.1,
            background_power: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EctOutcome {
    /// `Σ_k ‖x(k)‖²` over the whole simulation.
    pub output_power: f64,
    /// `Σ_k ‖x(k)‖²` before the detected endpoint.
    pub seizure_phase_power: f64,
    pub peak_power: f64,
    pub seizure_end_index: usize,
    pub psi: PsiResult,
}

/// Simulates a uniform stimulus from rest, detects the seizure endpoint and
/// computes PSI on the resulting EEG proxy.
pub fn ect_experiment(
    m: &ConnectomeMatrix,
    amplitude: f64,
    protocol: &EctProtocol,
    cfg: &PsiConfig,
    steps: usize,
) -> Result<EctOutcome, DynamicsError> {
    ect_experiment_with_trace(m, amplitude, protocol, cfg, steps).map(|(o, _)| o)
}

/// [`ect_experiment`], also returning the EEG proxy trace (background
/// included) with its endpoint marked.
pub fn ect_experiment_with_trace(
    m: &ConnectomeMatrix,
    amplitude: f64,
    protocol: &EctProtocol,
    cfg: &PsiConfig,
    steps: usize,
) -> Result<(EctOutcome, SignalTrace), DynamicsError> {
    if amplitude == 0.0 {
        return Err(DynamicsError::ZeroAmplitude);
    }
    let nodes = protocol
        .control_nodes
        .clone()
        .unwrap_or_else(|| (0..m.n()).collect());
    let schedule = InputSchedule::train(nodes, amplitude, protocol.stimulus_steps);
    let mut trace = simulate_lti(m, &schedule, &DVector::zeros(m.n()), steps)?;
    trace.sampling_rate = cfg.sampling_rate;

    let (peak_idx, peak) = trace
        .samples
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, p)| if p > best.1 { (k, p) } else { best });
    let threshold = protocol.endpoint_fraction * peak;
    let end = (peak_idx + 1..trace.len())
        .find(|&k| trace.samples[k] < threshold)
        .ok_or(DynamicsError::NoDecay {
            fraction: protocol.endpoint_fraction,
            steps,
        })?;

    let output_power: f64 = trace.samples.iter().sum();
    let seizure_phase_power: f64 = trace.samples[..end].iter().sum();
    for s in trace.samples.iter_mut() {
        *s += protocol.background_power;
    }
    trace.seizure_end_index = Some(end);
    let psi = compute_psi(&trace, cfg)?;
    let outcome = EctOutcome {
        output_power,
        seizure_phase_power,
        peak_power: peak,
        seizure_end_index: end,
        psi,
    };
    Ok((outcome, trace))
}

/// One point of a stability sweep over the family `c · A₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub spectral_radius: f64,
    pub mc_mean: f64,
    pub ac_mean: f64,
    pub output_power: f64,
    pub psi: f64,
}

/// Runs [`ect_experiment`] on `c · base` for `c = f / ρ(base)` for each
/// fraction `f` in `(0, 1)`.
pub fn stability_sweep(
    base: &ConnectomeMatrix,
    fractions: &[f64],
    amplitude: f64,
    protocol: &EctProtocol,
    cfg: &PsiConfig,
    steps: usize,
) -> Result<Vec<SweepPoint>, DynamicsError> {
    let rho = base.spectral_radius();
    fractions
        .iter()
        .map(|&f| {
            let c = if rho > 0.0 { f / rho } else { f };
            let m = base.scaled(c);
            let profile = control::controllability_profile(&m)?;
            let outcome = ect_experiment(&m, amplitude, protocol, cfg, steps)?;
            Ok(SweepPoint {
                c,
                spectral_radius: m.spectral_radius(),
                mc_mean: profile.mc_mean,
                ac_mean: profile.ac_mean,
                output_power: outcome.output_power,
                psi: outcome.psi.psi,
            })
        })
        .collect()
}
