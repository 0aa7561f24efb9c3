//! Sparsity rate estimator and the voltage control path.
//!
//! The estimator keeps a running spectrum estimate and performs exactly one
//! thresholded Landweber iteration per frame, warm-started from the previous
//! frame's estimate. The resulting support fraction is smoothed with an
//! exponential moving average and mapped to a target sampling probability,
//! which the calibration table turns into the gate voltage `V_SR`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clockgen::ClockConfig;
use crate::device::{characterize, output_probability, voltage_grid, DeviceParams};
use crate::error::{check_domain, Error, Result};
use crate::recovery::MeasurementOperator;
use crate::signals::MeasurementSet;
use crate::transform::mirror;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SreParams {
    /// Landweber step size.
    pub mu: f64,
    /// Entries below `lambda * max |theta|` are zeroed.
    pub lambda: f64,
    pub ema_alpha: f64,
    /// Rate assumed before the first frame has been observed.
    pub initial_rate: f64,
}

impl Default for SreParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.1,
            ema_alpha: 0.5,
            initial_rate: 0.10,
        }
    }
}

impl SreParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParams("mu must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParams("lambda must lie in [0, 1]".into()));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return Err(Error::InvalidParams("ema_alpha must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_rate) {
            return Err(Error::InvalidParams("initial_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SreState {
    pub theta_hat: Vec<Complex64>,
    pub s_hat: f64,
    pub ema_alpha: f64,
}

impl SreState {
    pub fn new(n: usize, params: &SreParams) -> Self {
        Self {
            theta_hat: vec![Complex64::new(0.0, 0.0); n],
            s_hat: params.initial_rate,
            ema_alpha: params.ema_alpha,
        }
    }

    pub fn n(&self) -> usize {
        self.theta_hat.len()
    }

    /// Sorted nonzero bins of the current estimate.
    pub fn support(&self) -> Vec<usize> {
        self.theta_hat
            .iter()
            .enumerate()
            .filter_map(|(k, c)| (c.norm() > 0.0).then_some(k))
            .collect()
    }
}

/// Zeroes every entry below `lambda * max |v|` and returns the kept indices.
/// An all-zero input keeps nothing.
pub fn hard_threshold(v: &mut [Complex64], lambda: f64) -> Vec<usize> {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut kept = Vec::new();
    let thr = lambda * max;
    for (k, c) in v.iter_mut().enumerate() {
        let mag = c.norm();
        if max > 0.0 && mag >= thr && mag > 0.0 {
            kept.push(k);
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    kept
}

/// One warm-started iteration:
/// `theta <- H(theta + mu A^H (y - A theta))`, followed by the moving-average
/// update of the rate with the new support fraction.
pub fn sre_update(
    state: &SreState,
    y: &MeasurementSet,
    a: &MeasurementOperator,
    mu: f64,
    lambda: f64,
) -> Result<SreState> {
    let n = state.n();
    if a.n() != n || y.n != n {
        return Err(Error::Dimension {
            expected: n,
            actual: a.n(),
            context: "operator / measurement dimension vs estimator length",
        });
    }
    if y.instants != a.instants() {
        return Err(Error::Dimension {
            expected: a.m(),
            actual: y.len(),
            context: "measurement instants vs operator",
        });
    }
    let mut v = state.theta_hat.clone();
    if !y.is_empty() {
        let pred = a.apply(&state.theta_hat);
        let r: Vec<Complex64> = y
            .values
            .iter()
            .zip(&pred)
            .map(|(&yv, p)| Complex64::new(yv, 0.0) - p)
            .collect();
        let g = a.adjoint(&r);
        for (vk, gk) in v.iter_mut().zip(g) {
            *vk += mu * gk;
        }
    }
    // Project onto real signals so mirror bins are kept or dropped together.
    let sym: Vec<Complex64> = (0..n).map(|k| 0.5 * (v[k] + v[mirror(k, n)].conj())).collect();
    v = sym;
    let kept = hard_threshold(&mut v, lambda);
    let rate = kept.len() as f64 / n as f64;
    Ok(SreState {
        theta_hat: v,
        s_hat: (1.0 - state.ema_alpha) * state.s_hat + state.ema_alpha * rate,
        ema_alpha: state.ema_alpha,
    })
}

/// Maps an estimated sparsity rate to the target sampling probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatePolicy {
    /// Samples per nonzero coefficient.
    pub kappa: f64,
    /// Floor that keeps at least a trickle of samples flowing.
    pub p_min: f64,
}

impl Default for RatePolicy {
    fn default() -> Self {
        Self {
            kappa: 4.0,
            p_min: 0.02,
        }
    }
}

pub fn rate_to_probability(s_hat: f64, policy: &RatePolicy) -> Result<f64> {
    check_domain("s_hat", s_hat, (0.0..=1.0).contains(&s_hat), "0 <= s_hat <= 1")?;
    check_domain("kappa", policy.kappa, policy.kappa > 0.0, "kappa > 0")?;
    Ok((policy.kappa * s_hat).clamp(policy.p_min, 1.0))
}

/// Voltage-to-probability table of the oscillator, nondecreasing in both
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    points: Vec<(f64, f64)>,
}

impl Calibration {
    /// Sorts by voltage and applies a running maximum to the probabilities.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|&(v, p)| !v.is_finite() || !(0.0..=1.0).contains(&p)) {
            return Err(Error::BadCalibration);
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut running = 0.0f64;
        for pt in &mut points {
            running = running.max(pt.1);
            pt.1 = running;
        }
        Ok(Self { points })
    }

    /// Accepts a table only if it is already monotone.
    pub fn from_monotone(points: Vec<(f64, f64)>) -> Result<Self> {
        let ok = !points.is_empty()
            && points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
            && points.iter().all(|&(_, p)| (0.0..=1.0).contains(&p));
        if ok {
            Ok(Self { points })
        } else {
            Err(Error::BadCalibration)
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Smallest voltage whose interpolated probability reaches `p`. Targets
/// outside the table's range clamp to the nearest endpoint.
pub fn probability_to_vsr(p: f64, cal: &Calibration) -> f64 {
    let pts = cal.points();
    let (v0, p0) = pts[0];
    if p <= p0 {
        return v0;
    }
    for w in pts.windows(2) {
        let ((va, pa), (vb, pb)) = (w[0], w[1]);
        if pb >= p {
            return va + (vb - va) * (p - pa) / (pb - pa);
        }
    }
    // Above the table maximum: first voltage reaching that maximum.
    let max = pts[pts.len() - 1].1;
    pts.iter().find(|pt| pt.1 >= max).map_or(v0, |pt| pt.0)
}

/// Builds a calibration table on a `grid_step` voltage grid. With
/// `n_samples == 0` the closed-form probability is used; otherwise each grid
/// point is measured over `n_samples` clock cycles.
pub fn calibrate<R: Rng + ?Sized>(
    dev: &DeviceParams,
    grid_step: f64,
    n_samples: usize,
    clock: &ClockConfig,
    rng: &mut R,
) -> Result<Calibration> {
    dev.validate()?;
    let grid = voltage_grid(dev.vdd, grid_step)?;
    let points = if n_samples == 0 {
        grid.iter()
            .map(|&v| Ok((v, output_probability(v, dev)?)))
            .collect::<Result<Vec<_>>>()?
    } else {
        characterize(&grid, n_samples, clock, dev, rng)?
            .into_iter()
            .map(|pt| (pt.vin, pt.probability))
            .collect()
    };
    Calibration::new(points)
}
