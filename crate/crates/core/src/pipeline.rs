//! Closed-loop acquisition: per frame the estimator state picks `V_SR`, the
//! oscillator produces the A-Clk trace, the frame is sampled and recovered,
//! and the estimator is updated for the next frame.
//!
//! Every random stream is derived from the master seed by selecting a ChaCha
//! stream from `(rate index, trial, purpose)`, so results do not depend on
//! trial order or on how many worker threads run them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clockgen::{generate_aclk, AClkTrace, ClockConfig};
use crate::device::{DeviceParams, StochasticOscillator};
use crate::error::{Error, Result};
use crate::recovery::{cosamp, normalized_error, omp, MeasurementOperator, RecoveryResult, Solver};
use crate::signals::{
    add_noise, generate_sparse_signal, sample_at, support_size, MeasurementSet, SignalOptions, SparseSignal,
};
use crate::sre::{
    calibrate, probability_to_vsr, rate_to_probability, sre_update, Calibration, RatePolicy, SreParams, SreState,
};

/// How the sampling probability of each frame is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum SamplingMode {
    /// Closed loop: estimated rate -> probability -> `V_SR`.
    Adaptive,
    /// Open loop at a fixed target probability, still realized through the
    /// calibration table and the oscillator.
    FixedProbability(f64),
    /// Open loop at a fixed gate voltage.
    FixedVoltage(f64),
}

/// Sparsity budget handed to the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SparsityBudget {
    /// Support size of the estimator's current spectrum estimate.
    #[default]
    Estimated,
    /// True support size of the test signal.
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub frames: usize,
    /// Leading frames of each trial left out of the aggregates.
    pub warmup_frames: usize,
    pub trials: usize,
    pub rates: Vec<f64>,
    pub solvers: Vec<Solver>,
    pub policy: RatePolicy,
    pub snr_db: Option<f64>,
    pub signal: SignalOptions,
    pub sampling: SamplingMode,
    pub budget: SparsityBudget,
    pub sre: SreParams,
    pub device: DeviceParams,
    pub f_clk: f64,
    /// Voltage step of the calibration table.
    pub calibration_step: f64,
    /// Cycles per calibration point; 0 uses the closed-form curve.
    pub calibration_samples: usize,
    pub cosamp_max_iter: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            frames: 6,
            warmup_frames: 2,
            trials: 200,
            rates: vec![0.05, 0.10, 0.15],
            solvers: vec![Solver::Omp, Solver::Cosamp],
            policy: RatePolicy::default(),
            snr_db: Some(25.0),
            signal: SignalOptions::default(),
            sampling: SamplingMode::Adaptive,
            budget: SparsityBudget::Estimated,
            sre: SreParams::default(),
            device: DeviceParams::default(),
            f_clk: 1e9,
            calibration_step: 0.005,
            calibration_samples: 0,
            cosamp_max_iter: 50,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn clock(&self) -> ClockConfig {
        ClockConfig {
            f_clk: self.f_clk,
            frame_len: self.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 4 || !self.n.is_power_of_two() {
            return bad(format!("n = {} must be a power of two >= 4", self.n));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.frames == 0 || self.warmup_frames >= self.frames {
            return bad(format!(
                "need frames > warmup_frames (got {} and {})",
                self.frames, self.warmup_frames
            ));
        }
        if self.rates.is_empty() || self.rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return bad("every sparsity rate must lie in (0, 1)".into());
        }
        for &r in &self.rates {
            support_size(self.n, r)?;
        }
        if self.solvers.is_empty() {
            return bad("at least one solver is required".into());
        }
        if !(self.policy.kappa > 0.0) || !(0.0..=1.0).contains(&self.policy.p_min) {
            return bad("kappa must be positive and p_min in [0, 1]".into());
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad("snr_db must be finite".into());
            }
        }
        match self.sampling {
            SamplingMode::FixedProbability(p) if !(0.0..=1.0).contains(&p) => {
                return bad(format!("fixed probability {p} outside [0, 1]"));
            }
            SamplingMode::FixedVoltage(v) if !(0.0..=self.device.vdd).contains(&v) => {
                return bad(format!("fixed voltage {v} outside [0, vdd]"));
            }
            _ => {}
        }
        self.sre.validate()?;
        self.device.validate()?;
        self.clock().validate()?;
        if !(self.calibration_step > 0.0) {
            return bad("calibration_step must be positive".into());
        }
        Ok(())
    }
}

/// Per-(rate, trial) random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Stream {
    Signal = 0,
    Device = 1,
    Noise = 2,
}

fn stream_rng(seed: u64, rate_idx: usize, trial: usize, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rate_idx as u64) << 40) | ((trial as u64) << 8) | purpose as u64);
    rng
}

/// Shared, immutable inputs of every frame.
#[derive(Debug, Clone)]
pub struct FrameContext {
    pub calibration: Calibration,
    pub clock: ClockConfig,
    pub policy: RatePolicy,
    pub sampling: SamplingMode,
    pub budget: SparsityBudget,
    pub sre: SreParams,
    pub solvers: Vec<Solver>,
    pub snr_db: Option<f64>,
    pub cosamp_max_iter: usize,
}

impl FrameContext {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let calibration = calibrate(
            &cfg.device,
            cfg.calibration_step,
            cfg.calibration_samples,
            &cfg.clock(),
            &mut rng,
        )?;
        Ok(Self {
            calibration,
            clock: cfg.clock(),
            policy: cfg.policy,
            sampling: cfg.sampling,
            budget: cfg.budget,
            sre: cfg.sre,
            solvers: cfg.solvers.clone(),
            snr_db: cfg.snr_db,
            cosamp_max_iter: cfg.cosamp_max_iter,
        })
    }

    /// Target probability and gate voltage for a frame given the estimator
    /// state after the previous frame.
    pub fn control(&self, sre: &SreState, vdd: f64) -> Result<(f64, f64)> {
        Ok(match self.sampling {
            SamplingMode::Adaptive => {
                let p = rate_to_probability(sre.s_hat.clamp(0.0, 1.0), &self.policy)?;
                (p, probability_to_vsr(p, &self.calibration).clamp(0.0, vdd))
            }
            SamplingMode::FixedProbability(p) => (p, probability_to_vsr(p, &self.calibration).clamp(0.0, vdd)),
            SamplingMode::FixedVoltage(v) => {
                let p = interpolate(&self.calibration, v);
                (p, v)
            }
        })
    }
}

fn interpolate(cal: &Calibration, v: f64) -> f64 {
    let pts = cal.points();
    if v <= pts[0].0 {
        return pts[0].1;
    }
    for w in pts.windows(2) {
        let ((va, pa), (vb, pb)) = (w[0], w[1]);
        if v <= vb {
            return pa + (pb - pa) * (v - va) / (vb - va);
        }
    }
    pts[pts.len() - 1].1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub solver: Solver,
    pub k: usize,
    /// `None` when the frame had no samples.
    pub result: Option<RecoveryResult>,
    pub normalized_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub measurements: MeasurementSet,
    pub trace: AClkTrace,
    pub v_sr: f64,
    pub p_target: f64,
    /// Rate estimate that drove this frame.
    pub s_hat_used: f64,
    pub outcomes: Vec<SolverOutcome>,
    pub next_sre: SreState,
}

impl FrameOutcome {
    pub fn failed(&self) -> bool {
        self.measurements.is_empty()
    }
}

fn choose_budget(ctx: &FrameContext, sre: &SreState, sig: &SparseSignal, m: usize) -> usize {
    let k = match ctx.budget {
        SparsityBudget::GroundTruth => sig.support.len(),
        SparsityBudget::Estimated => {
            let est = sre.support().len();
            if est > 0 {
                est
            } else {
                support_size(sig.n, sre.s_hat.clamp(1e-9, 1.0)).unwrap_or(2).max(2)
            }
        }
    };
    // Keeps the CoSaMP merge set (up to 3k atoms) no larger than m.
    k.min((m / 3).max(1))
}

fn recover(
    solver: Solver,
    y: &MeasurementSet,
    a: &MeasurementOperator,
    k: usize,
    max_iter: usize,
) -> Result<RecoveryResult> {
    let tol = crate::recovery::default_tolerance(y);
    match solver {
        Solver::Omp => omp(y, a, k, tol),
        Solver::Cosamp => cosamp(y, a, k, max_iter, tol),
    }
}

/// Executes one acquisition frame: control voltage from the previous
/// estimator state, A-Clk generation, sampling, recovery by every configured
/// solver, then one estimator update. A frame with no samples is reported
/// with error 1.0.
#[allow(clippy::too_many_arguments)]
pub fn run_frame(
    sig: &SparseSignal,
    sre: &SreState,
    osc: &mut StochasticOscillator,
    ctx: &FrameContext,
    frame_id: usize,
    device_rng: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> Result<FrameOutcome> {
    let (p_target, v_sr) = ctx.control(sre, osc.params.vdd)?;
    let trace = generate_aclk(osc, v_sr, &ctx.clock, frame_id, device_rng)?;
    let mut y = sample_at(sig, &trace)?;
    if let Some(snr) = ctx.snr_db {
        add_noise(&mut y, sig.power(), snr, noise_rng)?;
    }
    let a = MeasurementOperator::new(trace.instants(), sig.n)?;
    let m = y.len();

    let mut outcomes = Vec::with_capacity(ctx.solvers.len());
    for &solver in &ctx.solvers {
        if m == 0 {
            outcomes.push(SolverOutcome {
                solver,
                k: 0,
                result: None,
                normalized_error: 1.0,
            });
            continue;
        }
        let k = choose_budget(ctx, sre, sig, m);
        let res = recover(solver, &y, &a, k, ctx.cosamp_max_iter)?;
        let x_hat = a.synthesize(&res.theta_hat);
        let err = normalized_error(&sig.x, &x_hat)?;
        outcomes.push(SolverOutcome {
            solver,
            k,
            result: Some(res),
            normalized_error: err,
        });
    }

    let next_sre = sre_update(sre, &y, &a, ctx.sre.mu, ctx.sre.lambda)?;
    Ok(FrameOutcome {
        measurements: y,
        trace,
        v_sr,
        p_target,
        s_hat_used: sre.s_hat,
        outcomes,
        next_sre,
    })
}

/// One CSV row per (trial, frame, solver).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRow {
    pub trial: usize,
    pub frame: usize,
    pub algorithm: Solver,
    pub sparsity_rate: f64,
    pub s_true: f64,
    pub s_hat: f64,
    pub p_target: f64,
    pub v_sr: f64,
    pub m: usize,
    pub k: usize,
    pub normalized_error: f64,
    pub iterations: usize,
    pub warmup: bool,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: Solver,
    pub sparsity_rate: f64,
    pub mean_normalized_error: f64,
    /// Standard error of the mean, computed from per-trial means.
    pub std_error: f64,
    pub mean_m: f64,
    pub frames: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub rows: Vec<FrameRow>,
    pub summary: Vec<SummaryRow>,
}

impl TrialReport {
    pub fn summary_for(&self, solver: Solver, rate: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.algorithm == solver && s.sparsity_rate == rate)
    }
}

/// Frames of a single trial, for inspection or plotting.
#[derive(Debug, Clone)]
pub struct TrialTrace {
    pub signal: SparseSignal,
    pub frames: Vec<FrameOutcome>,
}

/// Runs one trial in full detail.
pub fn run_trial(cfg: &ExperimentConfig, ctx: &FrameContext, rate_idx: usize, trial: usize) -> Result<TrialTrace> {
    let rate = cfg.rates[rate_idx];
    let mut sig_rng = stream_rng(cfg.seed, rate_idx, trial, Stream::Signal);
    let mut dev_rng = stream_rng(cfg.seed, rate_idx, trial, Stream::Device);
    let mut noise_rng = stream_rng(cfg.seed, rate_idx, trial, Stream::Noise);
    let signal = generate_sparse_signal(cfg.n, rate, &cfg.signal, &mut sig_rng)?;
    let mut osc = StochasticOscillator::new(cfg.device)?;
    let mut sre = SreState::new(cfg.n, &cfg.sre);
    let mut frames = Vec::with_capacity(cfg.frames);
    for f in 0..cfg.frames {
        let out = run_frame(&signal, &sre, &mut osc, ctx, f, &mut dev_rng, &mut noise_rng)?;
        sre = out.next_sre.clone();
        frames.push(out);
    }
    Ok(TrialTrace { signal, frames })
}

fn trial_rows(cfg: &ExperimentConfig, ctx: &FrameContext, rate_idx: usize, trial: usize) -> Result<Vec<FrameRow>> {
    let tt = run_trial(cfg, ctx, rate_idx, trial)?;
    let mut rows = Vec::with_capacity(cfg.frames * cfg.solvers.len());
    for (f, out) in tt.frames.iter().enumerate() {
        for o in &out.outcomes {
            rows.push(FrameRow {
                trial,
                frame: f,
                algorithm: o.solver,
                sparsity_rate: cfg.rates[rate_idx],
                s_true: tt.signal.s_true,
                s_hat: out.s_hat_used,
                p_target: out.p_target,
                v_sr: out.v_sr,
                m: out.measurements.len(),
                k: o.k,
                normalized_error: o.normalized_error,
                iterations: o.result.as_ref().map_or(0, |r| r.iterations),
                warmup: f < cfg.warmup_frames,
                failed: out.failed(),
            });
        }
    }
    Ok(rows)
}

/// Aggregates steady-state rows per (solver, rate) in config order.
pub fn summarize(rows: &[FrameRow], rates: &[f64], solvers: &[Solver]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &solver in solvers {
        for &rate in rates {
            let sel: Vec<&FrameRow> = rows
                .iter()
                .filter(|r| !r.warmup && r.algorithm == solver && r.sparsity_rate == rate)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let count = sel.len() as f64;
            let mean = sel.iter().map(|r| r.normalized_error).sum::<f64>() / count;
            let mean_m = sel.iter().map(|r| r.m as f64).sum::<f64>() / count;
            let mut trial_ids: Vec<usize> = sel.iter().map(|r| r.trial).collect();
            trial_ids.sort_unstable();
            trial_ids.dedup();
            let per_trial: Vec<f64> = trial_ids
                .iter()
                .map(|&t| {
                    let e: Vec<f64> = sel
                        .iter()
                        .filter(|r| r.trial == t)
                        .map(|r| r.normalized_error)
                        .collect();
                    e.iter().sum::<f64>() / e.len() as f64
                })
                .collect();
            let std_error = if per_trial.len() > 1 {
                let tm = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
                let var = per_trial.iter().map(|v| (v - tm).powi(2)).sum::<f64>() / (per_trial.len() - 1) as f64;
                (var / per_trial.len() as f64).sqrt()
            } else {
                0.0
            };
            out.push(SummaryRow {
                algorithm: solver,
                sparsity_rate: rate,
                mean_normalized_error: mean,
                std_error,
                mean_m,
                frames: sel.len(),
                trials: per_trial.len(),
            });
        }
    }
    out
}

/// Runs every (rate, trial) pair, possibly in parallel, and aggregates the
/// steady-state frames. Rows are ordered by rate, trial, frame, solver.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialReport> {
    let ctx = FrameContext::from_config(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.rates.len())
        .flat_map(|r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();
    let per_job: Vec<Vec<FrameRow>> = jobs
        .par_iter()
        .map(|&(r, t)| trial_rows(cfg, &ctx, r, t))
        .collect::<Result<_>>()?;
    let rows: Vec<FrameRow> = per_job.into_iter().flatten().collect();
    let summary = summarize(&rows, &cfg.rates, &cfg.solvers);
    Ok(TrialReport { rows, summary })
}
