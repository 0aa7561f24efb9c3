//! Spectrally sparse test signals and non-uniform sampling of them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clockgen::AClkTrace;
use crate::error::{Error, Result};
use crate::transform::{mirror, UnitaryDft};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalOptions {
    /// Tone magnitudes are drawn uniformly from `[amp_min, amp_max]`.
    pub amp_min: f64,
    pub amp_max: f64,
    /// Tones sit exactly on DFT bins when true; otherwise each tone is offset
    /// by up to half a bin, which leaks energy into neighbouring bins.
    pub on_grid: bool,
}

impl Default for SignalOptions {
    fn default() -> Self {
        Self {
            amp_min: 0.5,
            amp_max: 1.0,
            on_grid: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub n: usize,
    pub x: Vec<f64>,
    pub theta_true: Vec<Complex64>,
    /// Sorted nonzero bins, conjugate mirrors included.
    pub support: Vec<usize>,
    pub s_true: f64,
}

impl SparseSignal {
    /// Mean power of the time-domain frame.
    pub fn power(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }
}

/// Number of nonzero bins for a requested rate: `s n` rounded up to the next
/// even integer.
pub fn support_size(n: usize, s: f64) -> Result<usize> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InfeasibleSignal(format!("sparsity rate {s} must lie in (0, 1]")));
    }
    let raw = (s * n as f64 - 1e-9).ceil() as usize;
    Ok(raw + raw % 2)
}

/// Draws `support_size(n, s) / 2` distinct positive-frequency bins, random
/// magnitudes and phases, mirrors them into conjugate pairs and synthesizes
/// the real frame.
pub fn generate_sparse_signal<R: Rng + ?Sized>(
    n: usize,
    s: f64,
    opts: &SignalOptions,
    rng: &mut R,
) -> Result<SparseSignal> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::InfeasibleSignal(format!(
            "frame length {n} must be a power of two >= 4"
        )));
    }
    if !(opts.amp_min > 0.0 && opts.amp_min <= opts.amp_max) {
        return Err(Error::InvalidParams(format!(
            "amplitude range [{}, {}] is invalid",
            opts.amp_min, opts.amp_max
        )));
    }
    let k = support_size(n, s)?;
    let pairs = k / 2;
    // Bins 1..n/2; DC and Nyquist are their own mirrors.
    let available = n / 2 - 1;
    if pairs > available {
        return Err(Error::InfeasibleSignal(format!(
            "{k} nonzero bins do not fit in a frame of {n}"
        )));
    }
    let bins: Vec<usize> = sample(rng, available, pairs).into_iter().map(|i| i + 1).collect();

    let dft = UnitaryDft::new(n);
    let norm = (n as f64).sqrt();
    let mut theta = vec![Complex64::new(0.0, 0.0); n];
    let mut x = vec![0.0; n];
    for &bin in &bins {
        let amp = if opts.amp_min == opts.amp_max {
            opts.amp_min
        } else {
            rng.random_range(opts.amp_min..opts.amp_max)
        };
        let phase = rng.random_range(0.0..2.0 * PI);
        if opts.on_grid {
            let c = Complex64::from_polar(amp, phase);
            theta[bin] = c;
            theta[n - bin] = c.conj();
        } else {
            let offset: f64 = rng.random_range(-0.5..0.5);
            let freq = (bin as f64 + offset).clamp(0.5, n as f64 / 2.0 - 0.5);
            for (t, v) in x.iter_mut().enumerate() {
                *v += 2.0 * amp / norm * (2.0 * PI * freq * t as f64 / n as f64 + phase).cos();
            }
        }
    }
    if opts.on_grid {
        x = dft.inverse_vec(&theta).into_iter().map(|c| c.re).collect();
    } else {
        theta = dft.forward_real(&x);
    }
    let mut support: Vec<usize> = bins.iter().flat_map(|&b| [b, n - b]).collect();
    support.sort_unstable();
    Ok(SparseSignal {
        n,
        x,
        theta_true: theta,
        s_true: support.len() as f64 / n as f64,
        support,
    })
}

/// Samples selected on the Nyquist grid during one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    pub instants: Vec<usize>,
    pub values: Vec<f64>,
    pub n: usize,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Picks the signal values at the A-Clk instants.
pub fn sample_at(sig: &SparseSignal, trace: &AClkTrace) -> Result<MeasurementSet> {
    if trace.frame_len() != sig.n {
        return Err(Error::Dimension {
            expected: sig.n,
            actual: trace.frame_len(),
            context: "trace frame length vs signal length",
        });
    }
    let values = trace
        .instants()
        .iter()
        .map(|&k| {
            sig.x.get(k).copied().ok_or(Error::Domain {
                name: "instant",
                value: k as f64,
                expected: "instant < n",
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSet {
        instants: trace.instants().to_vec(),
        values,
        n: sig.n,
    })
}

/// Adds white Gaussian noise whose variance is `signal_power / 10^(snr_db/10)`.
pub fn add_noise<R: Rng + ?Sized>(y: &mut MeasurementSet, signal_power: f64, snr_db: f64, rng: &mut R) -> Result<()> {
    let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(format!("noise level: {e}")))?;
    for v in &mut y.values {
        *v += normal.sample(rng);
    }
    Ok(())
}

/// True if `theta` is conjugate-symmetric to within `tol`.
pub fn is_conjugate_symmetric(theta: &[Complex64], tol: f64) -> bool {
    let n = theta.len();
    (0..n).all(|k| (theta[k] - theta[mirror(k, n)].conj()).norm() <= tol)
}
