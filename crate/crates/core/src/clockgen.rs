//! Digital half of the adaptive-rate clock generator. The oscillator bit is
//! latched by a D flip-flop on every system-clock edge and NAND-gated with the
//! clock, so the asynchronous clock (A-Clk) pulses exactly on the cycles whose
//! latched bit is 1. A trace is kept as the set of those cycle indices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::StochasticOscillator;
use crate::error::{check_domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    /// System clock, hertz.
    pub f_clk: f64,
    /// System-clock cycles per frame.
    pub frame_len: usize,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            f_clk: 1e9,
            frame_len: 1024,
        }
    }
}

impl ClockConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_clk > 0.0 && self.f_clk.is_finite()) {
            return Err(Error::InvalidParams("f_clk must be positive".into()));
        }
        if self.frame_len == 0 {
            return Err(Error::InvalidParams("frame_len must be positive".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f_clk
    }
}

/// Cycle indices at which the A-Clk fired within one frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AClkTrace {
    instants: Vec<usize>,
    frame_len: usize,
    pub frame_id: usize,
}

impl AClkTrace {
    /// Builds a trace from arbitrary indices; they are sorted and deduplicated.
    pub fn new(mut instants: Vec<usize>, frame_len: usize, frame_id: usize) -> Result<Self> {
        instants.sort_unstable();
        instants.dedup();
        if let Some(&last) = instants.last() {
            if last >= frame_len {
                return Err(Error::Domain {
                    name: "instant",
                    value: last as f64,
                    expected: "instant < frame_len",
                });
            }
        }
        Ok(Self {
            instants,
            frame_len,
            frame_id,
        })
    }

    /// Every cycle of the frame, i.e. uniform Nyquist-rate sampling.
    pub fn full(frame_len: usize, frame_id: usize) -> Self {
        Self {
            instants: (0..frame_len).collect(),
            frame_len,
            frame_id,
        }
    }

    pub fn instants(&self) -> &[usize] {
        &self.instants
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }
}

/// Ideal D flip-flop: `Q[k]` is the input value at rising edge `k`.
pub fn dff_sample(bits: &[bool], cfg: &ClockConfig) -> Result<Vec<bool>> {
    if bits.len() != cfg.frame_len {
        return Err(Error::Dimension {
            expected: cfg.frame_len,
            actual: bits.len(),
            context: "bitstream length vs frame_len",
        });
    }
    Ok(bits.to_vec())
}

/// NAND of the latched bit with the system clock. Cycle `k` emits an A-Clk
/// pulse iff `Q[k]` is 1; pulse polarity is not modeled.
pub fn nand_gate(q: &[bool], cfg: &ClockConfig, frame_id: usize) -> Result<AClkTrace> {
    if q.len() != cfg.frame_len {
        return Err(Error::Dimension {
            expected: cfg.frame_len,
            actual: q.len(),
            context: "Q stream length vs frame_len",
        });
    }
    let instants = q.iter().enumerate().filter_map(|(k, &bit)| bit.then_some(k)).collect();
    Ok(AClkTrace {
        instants,
        frame_len: cfg.frame_len,
        frame_id,
    })
}

/// Runs the oscillator for one frame at gate voltage `v_sr` and returns the
/// resulting A-Clk trace.
pub fn generate_aclk<R: Rng + ?Sized>(
    osc: &mut StochasticOscillator,
    v_sr: f64,
    cfg: &ClockConfig,
    frame_id: usize,
    rng: &mut R,
) -> Result<AClkTrace> {
    cfg.validate()?;
    let vdd = osc.params.vdd;
    check_domain("v_sr", v_sr, (0.0..=vdd).contains(&v_sr), "0 <= v_sr <= vdd")?;
    let bits = osc.run(v_sr, cfg.frame_len, cfg, rng)?;
    let q = dff_sample(&bits, cfg)?;
    nand_gate(&q, cfg, frame_id)
}
