//! Behavioral model of the stochastic MRAM oscillator: a low-barrier MTJ in
//! series with an NMOS pull-down, followed by an inverter.
//!
//! The free-layer magnetization `m_z` is a parametric random process. The MTJ
//! conductance follows `G = G0 (1 + m_z TMR / (2 + TMR))` and the normalized
//! drain voltage of the divider is
//!
//! ```text
//! V_drain / V_DD = ((2 + TMR) + TMR m_z) / ((2 + TMR)(1 + alpha) + TMR m_z)
//! ```
//!
//! with `alpha = G_T / G0`. The inverter is an ideal comparator, so the output
//! bit is 1 exactly when the drain sits below the inverter threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clockgen::ClockConfig;
use crate::error::{check_domain, Error, Result};

/// Slack allowed when checking voltages against the rails.
const RAIL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MzMode {
    /// `m_z` is redrawn uniformly on [-1, 1] once per elapsed `tau_c`.
    #[default]
    UniformResample,
    /// `m_z` flips between -1 and +1 with exponential dwell times of mean `tau_c`.
    BinaryTelegraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// Average MTJ conductance `(G_P + G_AP) / 2`, siemens.
    pub g0: f64,
    pub tmr: f64,
    pub vdd: f64,
    /// Cutoff of the piecewise-linear NMOS conductance model.
    pub vtn: f64,
    pub vth_inv: f64,
    pub mz_mode: MzMode,
    /// Correlation / update interval of the `m_z` process, seconds.
    pub tau_c: f64,
    /// Energy barrier in units of kT. Informational only.
    pub energy_barrier_kt: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            g0: 1e-5,
            tmr: 1.0,
            vdd: 0.8,
            vtn: 0.2,
            vth_inv: 0.4,
            mz_mode: MzMode::UniformResample,
            tau_c: 100e-12,
            energy_barrier_kt: 1.0,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.g0 > 0.0 && self.g0.is_finite()) {
            return bad("g0 must be positive");
        }
        if !(self.tmr > 0.0 && self.tmr.is_finite()) {
            return bad("tmr must be positive");
        }
        if !(self.vdd > 0.0 && self.vdd.is_finite()) {
            return bad("vdd must be positive");
        }
        if !(self.vtn > 0.0 && self.vtn < self.vdd) {
            return bad("vtn must lie strictly between 0 and vdd");
        }
        if !(self.vth_inv > 0.0 && self.vth_inv < self.vdd) {
            return bad("vth_inv must lie strictly between 0 and vdd");
        }
        if !(self.vtn < 0.5 * self.vdd) {
            return bad("vtn must be below vdd/2 so that alpha = 1 is reachable");
        }
        if !(self.tau_c > 0.0 && self.tau_c.is_finite()) {
            return bad("tau_c must be positive");
        }
        if !(self.energy_barrier_kt < 40.0) {
            return bad("energy barrier must be well below 40 kT (low-barrier regime)");
        }
        Ok(())
    }

    /// Parallel-state conductance `2 G0 (1 + TMR) / (2 + TMR)`.
    pub fn g_parallel(&self) -> f64 {
        2.0 * self.g0 * (1.0 + self.tmr) / (2.0 + self.tmr)
    }

    /// Antiparallel-state conductance `2 G0 / (2 + TMR)`.
    pub fn g_antiparallel(&self) -> f64 {
        2.0 * self.g0 / (2.0 + self.tmr)
    }

    /// `G_T(vin) / G0`.
    pub fn alpha(&self, vin: f64) -> Result<f64> {
        Ok(transistor_conductance(vin, self)? / self.g0)
    }

    fn check_vin(&self, vin: f64) -> Result<f64> {
        check_domain(
            "vin",
            vin,
            vin >= -RAIL_EPS && vin <= self.vdd + RAIL_EPS,
            "0 <= vin <= vdd",
        )?;
        Ok(vin.clamp(0.0, self.vdd))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    pub mz: f64,
    pub time: f64,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self { mz: 0.0, time: 0.0 }
    }
}

fn check_mz(mz: f64) -> Result<()> {
    check_domain("mz", mz, mz.abs() <= 1.0, "|mz| <= 1")
}

pub fn mtj_conductance(mz: f64, p: &DeviceParams) -> Result<f64> {
    check_mz(mz)?;
    Ok(p.g0 * (1.0 + mz * p.tmr / (2.0 + p.tmr)))
}

/// Piecewise-linear NMOS stand-in: off below `vtn`, linear above, pinned so
/// that `G_T = G0` at half supply.
pub fn transistor_conductance(vin: f64, p: &DeviceParams) -> Result<f64> {
    let vin = p.check_vin(vin)?;
    if vin <= p.vtn {
        Ok(0.0)
    } else {
        Ok(p.g0 * (vin - p.vtn) / (0.5 * p.vdd - p.vtn))
    }
}

/// Drain voltage as a fraction of `V_DD`.
pub fn drain_voltage(mz: f64, alpha: f64, p: &DeviceParams) -> Result<f64> {
    check_mz(mz)?;
    check_domain("alpha", alpha, alpha >= 0.0, "alpha >= 0")?;
    let a = 2.0 + p.tmr;
    let num = a + p.tmr * mz;
    Ok(num / (a * (1.0 + alpha) + p.tmr * mz))
}

/// Inverter output for a given drain fraction.
fn inverter(v_drain: f64, p: &DeviceParams) -> bool {
    v_drain * p.vdd < p.vth_inv
}

fn advance_mz<R: Rng + ?Sized>(state: &DeviceState, dt: f64, p: &DeviceParams, rng: &mut R) -> f64 {
    match p.mz_mode {
        MzMode::UniformResample => {
            let before = (state.time / p.tau_c).floor();
            let after = ((state.time + dt) / p.tau_c).floor();
            if dt >= p.tau_c || after > before {
                rng.random_range(-1.0..=1.0)
            } else {
                state.mz
            }
        }
        MzMode::BinaryTelegraph => {
            // Probability of an odd number of Poisson flips in dt.
            let p_flip = 0.5 * (1.0 - (-2.0 * dt / p.tau_c).exp());
            let current = if state.mz < 0.0 { -1.0 } else { 1.0 };
            if rng.random::<f64>() < p_flip {
                -current
            } else {
                current
            }
        }
    }
}

/// Advances the device by `dt` seconds with gate voltage `vin` and returns the
/// new state together with the amplified output bit.
pub fn step<R: Rng + ?Sized>(
    state: DeviceState,
    vin: f64,
    dt: f64,
    p: &DeviceParams,
    rng: &mut R,
) -> Result<(DeviceState, bool)> {
    check_domain("dt", dt, dt > 0.0, "dt > 0")?;
    let alpha = p.alpha(vin)?;
    let mz = advance_mz(&state, dt, p, rng);
    let v_drain = drain_voltage(mz, alpha, p)?;
    let next = DeviceState {
        mz,
        time: state.time + dt,
    };
    Ok((next, inverter(v_drain, p)))
}

/// Threshold magnetization below which the output bit is 1, obtained by
/// solving the drain equation for `m_z` at the inverter threshold.
fn threshold_magnetization(vin: f64, p: &DeviceParams) -> Result<Option<f64>> {
    let v = p.vth_inv / p.vdd;
    if v >= 1.0 {
        return Ok(None);
    }
    let alpha = p.alpha(vin)?;
    Ok(Some((2.0 + p.tmr) * (v * (1.0 + alpha) - 1.0) / (p.tmr * (1.0 - v))))
}

/// Closed-form stationary probability that the output bit is 1.
pub fn output_probability(vin: f64, p: &DeviceParams) -> Result<f64> {
    let Some(m_star) = threshold_magnetization(vin, p)? else {
        return Ok(0.0);
    };
    Ok(match p.mz_mode {
        MzMode::UniformResample => ((m_star + 1.0) / 2.0).clamp(0.0, 1.0),
        MzMode::BinaryTelegraph => {
            let lo = if m_star > -1.0 { 0.5 } else { 0.0 };
            let hi = if m_star > 1.0 { 0.5 } else { 0.0 };
            lo + hi
        }
    })
}

/// Peak-to-peak drain swing in volts over `m_z` in [-1, 1] at fixed `alpha`.
pub fn drain_swing(alpha: f64, p: &DeviceParams) -> Result<f64> {
    Ok((drain_voltage(1.0, alpha, p)? - drain_voltage(-1.0, alpha, p)?) * p.vdd)
}

/// A device instance carrying its own state across calls.
#[derive(Debug, Clone)]
pub struct StochasticOscillator {
    pub params: DeviceParams,
    pub state: DeviceState,
}

impl StochasticOscillator {
    pub fn new(params: DeviceParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: DeviceState::default(),
        })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, vin: f64, dt: f64, rng: &mut R) -> Result<bool> {
        let (next, bit) = step(self.state, vin, dt, &self.params, rng)?;
        self.state = next;
        Ok(bit)
    }

    /// Holds `vin` for `cycles` clock periods and returns one bit per cycle.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        vin: f64,
        cycles: usize,
        clock: &ClockConfig,
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        let dt = clock.period();
        (0..cycles).map(|_| self.step(vin, dt, rng)).collect()
    }
}

/// Input staircase used to characterize the oscillator: the gate voltage
/// starts at ground and rises by `step_volts` every `dwell_s` until `V_DD`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseProtocol {
    pub step_volts: f64,
    pub dwell_s: f64,
}

impl Default for StaircaseProtocol {
    fn default() -> Self {
        Self {
            step_volts: 0.2,
            dwell_s: 100e-9,
        }
    }
}

impl StaircaseProtocol {
    pub fn grid(&self, vdd: f64) -> Result<Vec<f64>> {
        voltage_grid(vdd, self.step_volts)
    }

    pub fn samples_per_step(&self, clock: &ClockConfig) -> usize {
        (self.dwell_s * clock.f_clk).round().max(1.0) as usize
    }
}

/// `0, step, 2 step, ...` up to and including `vdd`, snapped to 1 nV. The
/// last point is `vdd` itself even when `vdd` is not a multiple of `step`.
pub fn voltage_grid(vdd: f64, step: f64) -> Result<Vec<f64>> {
    check_domain("grid_step", step, step > 0.0 && step.is_finite(), "grid_step > 0")?;
    let n = (vdd / step - 1e-9).ceil() as usize;
    let mut grid: Vec<f64> = (0..n).map(|i| (i as f64 * step * 1e9).round() / 1e9).collect();
    grid.push(vdd);
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizationPoint {
    pub vin: f64,
    pub probability: f64,
    pub n_samples: usize,
}

/// One D-FF sample of the staircase run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaircaseSample {
    pub cycle: usize,
    pub vin: f64,
    pub bit: bool,
}

/// Runs the staircase over `vin_grid`, holding each level for `n_samples`
/// clock cycles on a single device instance, and reports the ones-fraction
/// per level.
pub fn characterize<R: Rng + ?Sized>(
    vin_grid: &[f64],
    n_samples: usize,
    clock: &ClockConfig,
    p: &DeviceParams,
    rng: &mut R,
) -> Result<Vec<CharacterizationPoint>> {
    let (points, _) = run_staircase(vin_grid, n_samples, clock, p, rng, false)?;
    Ok(points)
}

/// Like [`characterize`] but also returns every sampled bit.
pub fn characterize_with_trace<R: Rng + ?Sized>(
    vin_grid: &[f64],
    n_samples: usize,
    clock: &ClockConfig,
    p: &DeviceParams,
    rng: &mut R,
) -> Result<(Vec<CharacterizationPoint>, Vec<StaircaseSample>)> {
    run_staircase(vin_grid, n_samples, clock, p, rng, true)
}

fn run_staircase<R: Rng + ?Sized>(
    vin_grid: &[f64],
    n_samples: usize,
    clock: &ClockConfig,
    p: &DeviceParams,
    rng: &mut R,
    record: bool,
) -> Result<(Vec<CharacterizationPoint>, Vec<StaircaseSample>)> {
    if n_samples == 0 {
        return Err(Error::InvalidParams("n_samples must be positive".into()));
    }
    clock.validate()?;
    let mut osc = StochasticOscillator::new(*p)?;
    let mut trace = Vec::new();
    let mut points = Vec::with_capacity(vin_grid.len());
    let dt = clock.period();
    let mut cycle = 0;
    for &vin in vin_grid {
        let mut ones = 0usize;
        for _ in 0..n_samples {
            let bit = osc.step(vin, dt, rng)?;
            ones += bit as usize;
            if record {
                trace.push(StaircaseSample { cycle, vin, bit });
            }
            cycle += 1;
        }
        points.push(CharacterizationPoint {
            vin,
            probability: ones as f64 / n_samples as f64,
            n_samples,
        });
    }
    Ok((points, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn conductance_endpoints() {
        let p = defaults();
        assert!((mtj_conductance(0.0, &p).unwrap() - 1e-5).abs() < 1e-20);
        let gp = mtj_conductance(1.0, &p).unwrap();
        let gap = mtj_conductance(-1.0, &p).unwrap();
        assert!((gp - 4.0 / 3.0 * 1e-5).abs() < 1e-18);
        assert!((gap - 2.0 / 3.0 * 1e-5).abs() < 1e-18);
        assert!((gp - p.g_parallel()).abs() < 1e-18);
        assert!((gap - p.g_antiparallel()).abs() < 1e-18);
        assert!(mtj_conductance(1.5, &p).is_err());
    }

    #[test]
    fn tmr_identity_holds_for_many_ratios() {
        for &tmr in &[0.1, 0.5, 1.0, 2.0, 3.7] {
            let p = DeviceParams { tmr, ..defaults() };
            let gp = mtj_conductance(1.0, &p).unwrap();
            let gap = mtj_conductance(-1.0, &p).unwrap();
            assert!(((gp - gap) / gap - tmr).abs() < 1e-12 * tmr.max(1.0));
        }
    }

    #[test]
    fn transistor_model() {
        let p = defaults();
        assert_eq!(transistor_conductance(0.0, &p).unwrap(), 0.0);
        assert!((transistor_conductance(0.4, &p).unwrap() - 1e-5).abs() < 1e-18);
        assert!((transistor_conductance(0.8, &p).unwrap() - 3e-5).abs() < 1e-18);
        assert!(transistor_conductance(-0.1, &p).is_err());
        assert!(transistor_conductance(0.9, &p).is_err());
        let mut prev = 0.0;
        for i in 0..=80 {
            let g = transistor_conductance(i as f64 * 0.01, &p).unwrap();
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn drain_voltage_examples() {
        let p = defaults();
        for &tmr in &[0.5, 1.0, 2.0] {
            let q = DeviceParams { tmr, ..p };
            assert!((drain_voltage(0.0, 1.0, &q).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!((drain_voltage(1.0, 1.0, &p).unwrap() - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(drain_voltage(0.3, 0.0, &p).unwrap(), 1.0);
        assert!(drain_voltage(0.0, -0.1, &p).is_err());
    }

    #[test]
    fn drain_is_monotone_in_mz_and_alpha() {
        let p = defaults();
        for ai in 1..20 {
            let alpha = ai as f64 * 0.2;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=40 {
                let mz = -1.0 + i as f64 * 0.05;
                let v = drain_voltage(mz, alpha, &p).unwrap();
                assert!(v > prev);
                prev = v;
                assert!(drain_voltage(mz, alpha + 0.1, &p).unwrap() < v);
            }
        }
    }

    #[test]
    fn drain_swing_is_hundreds_of_millivolts() {
        let p = defaults();
        let swing = drain_swing(1.0, &p).unwrap();
        assert!((swing - (4.0 / 7.0 - 2.0 / 5.0) * 0.8).abs() < 1e-12);
        assert!(swing > 0.05 && swing < 0.5, "swing = {swing}");
    }

    #[test]
    fn output_probability_examples() {
        let p = defaults();
        assert!((output_probability(0.4, &p).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(output_probability(0.0, &p).unwrap(), 0.0);
        assert_eq!(output_probability(0.8, &p).unwrap(), 1.0);
        let mut prev = 0.0;
        for i in 0..=160 {
            let q = output_probability(i as f64 * 0.005, &p).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn output_probability_threshold_at_rail_is_zero() {
        // vth_inv = vdd cannot pass validation, but the formula must not divide by zero.
        let p = DeviceParams {
            vth_inv: 0.8,
            ..defaults()
        };
        assert_eq!(output_probability(0.8, &p).unwrap(), 0.0);
    }

    #[test]
    fn rails_give_constant_bits() {
        let p = defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = DeviceState::default();
        for _ in 0..1000 {
            let (n, bit) = step(s, 0.0, 1e-9, &p, &mut rng).unwrap();
            assert!(!bit);
            s = n;
        }
        for _ in 0..1000 {
            let (n, bit) = step(s, 0.8, 1e-9, &p, &mut rng).unwrap();
            assert!(bit);
            s = n;
        }
        assert!(step(s, 0.4, 0.0, &p, &mut rng).is_err());
    }

    #[test]
    fn worst_case_full_gate_drain_is_below_threshold() {
        let p = defaults();
        let v = drain_voltage(1.0, 3.0, &p).unwrap();
        assert!((v - 4.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn half_supply_ones_fraction() {
        let p = defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = DeviceState::default();
        let n = 100_000;
        let mut ones = 0;
        for _ in 0..n {
            let (next, bit) = step(s, 0.4, 1e-9, &p, &mut rng).unwrap();
            ones += bit as usize;
            s = next;
        }
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "frac = {frac}");
    }

    #[test]
    fn slow_mz_process_holds_value_between_updates() {
        let p = DeviceParams {
            tau_c: 10e-9,
            ..defaults()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = DeviceState::default();
        let mut changes = 0;
        for _ in 0..1000 {
            let (next, _) = step(s, 0.4, 1e-9, &p, &mut rng).unwrap();
            if next.mz != s.mz {
                changes += 1;
            }
            s = next;
        }
        assert!((95..=105).contains(&changes), "changes = {changes}");
    }

    #[test]
    fn telegraph_mode_has_three_levels() {
        let p = DeviceParams {
            mz_mode: MzMode::BinaryTelegraph,
            ..defaults()
        };
        assert_eq!(output_probability(0.0, &p).unwrap(), 0.0);
        assert_eq!(output_probability(0.4, &p).unwrap(), 0.5);
        assert_eq!(output_probability(0.8, &p).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = DeviceState { mz: 1.0, time: 0.0 };
        let mut ones = 0;
        for _ in 0..20_000 {
            let (next, bit) = step(s, 0.4, 1e-9, &p, &mut rng).unwrap();
            assert!(next.mz == 1.0 || next.mz == -1.0);
            ones += bit as usize;
            s = next;
        }
        let frac = ones as f64 / 20_000.0;
        assert!((frac - 0.5).abs() < 0.03, "frac = {frac}");
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(defaults().validate().is_ok());
        for p in [
            DeviceParams { g0: 0.0, ..defaults() },
            DeviceParams {
                tmr: -1.0,
                ..defaults()
            },
            DeviceParams { vtn: 0.9, ..defaults() },
            DeviceParams {
                vth_inv: 0.0,
                ..defaults()
            },
            DeviceParams {
                tau_c: 0.0,
                ..defaults()
            },
            DeviceParams {
                energy_barrier_kt: 40.0,
                ..defaults()
            },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn grids() {
        assert_eq!(voltage_grid(0.8, 0.2).unwrap().len(), 5);
        let g = voltage_grid(0.8, 0.1).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(*g.last().unwrap(), 0.8);
        assert_eq!(voltage_grid(0.8, 0.8).unwrap(), vec![0.0, 0.8]);
        assert!(voltage_grid(0.8, 0.0).is_err());
        assert_eq!(
            StaircaseProtocol::default().samples_per_step(&ClockConfig::default()),
            100
        );
    }

    #[test]
    fn characterize_rails_and_monotone_staircase() {
        let p = defaults();
        let clock = ClockConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = characterize(&[0.0, 0.8], 1000, &clock, &p, &mut rng).unwrap();
        assert_eq!(pts[0].probability, 0.0);
        assert_eq!(pts[1].probability, 1.0);

        let grid = StaircaseProtocol::default().grid(p.vdd).unwrap();
        let (pts, trace) = characterize_with_trace(&grid, 100, &clock, &p, &mut rng).unwrap();
        assert_eq!(trace.len(), 500);
        assert!(pts.windows(2).all(|w| w[0].probability <= w[1].probability));
        assert!(characterize(&[0.4], 0, &clock, &p, &mut rng).is_err());
    }

    #[test]
    fn characterize_matches_oracle_at_half_supply() {
        let p = defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let pts = characterize(&[0.4], n, &ClockConfig::default(), &p, &mut rng).unwrap();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((pts[0].probability - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn identical_seeds_give_identical_bitstreams() {
        let p = defaults();
        let clock = ClockConfig::default();
        let a = StochasticOscillator::new(p)
            .unwrap()
            .run(0.42, 4096, &clock, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
        let b = StochasticOscillator::new(p)
            .unwrap()
            .run(0.42, 4096, &clock, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
        assert_eq!(a, b);
    }
}
