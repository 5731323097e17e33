//! Second-order Butterworth low-pass action filter.
//!
//! Designed by bilinear transform with frequency prewarping, so the -3 dB
//! point lands exactly at the requested cutoff. DC gain is 1 by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ACTION_DIM;

/// Biquad coefficients (denominator normalized to a0 = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterworthCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ButterworthCoeffs {
    /// Second-order Butterworth low-pass at `cutoff_hz` for a `sample_hz`
    /// sample rate. Fails when the cutoff is not below Nyquist.
    pub fn lowpass(cutoff_hz: f64, sample_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0) || cutoff_hz >= sample_hz / 2.0 {
            return Err(Error::Config(format!(
                "filter cutoff must lie in (0, {}) Hz, got {cutoff_hz}",
                sample_hz / 2.0
            )));
        }
        let warped = (std::f64::consts::PI * cutoff_hz / sample_hz).tan();
        let w2 = warped * warped;
        let sqrt2_w = std::f64::consts::SQRT_2 * warped;
        let denom = 1.0 + sqrt2_w + w2;
        let coeffs = ButterworthCoeffs {
            b0: w2 / denom,
            b1: 2.0 * w2 / denom,
            b2: w2 / denom,
            a1: 2.0 * (w2 - 1.0) / denom,
            a2: (1.0 - sqrt2_w + w2) / denom,
        };
        debug_assert!(coeffs.is_stable());
        Ok(coeffs)
    }

    /// Poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Steady-state gain at 0 Hz.
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }
}

/// Per-joint biquad state (direct form II transposed).
#[derive(Debug, Clone)]
pub struct ActionFilter {
    coeffs: ButterworthCoeffs,
    state: [[f64; 2]; ACTION_DIM],
}

impl ActionFilter {
    pub fn new(coeffs: ButterworthCoeffs) -> Self {
        ActionFilter {
            coeffs,
            state: [[0.0; 2]; ACTION_DIM],
        }
    }

    /// Clears the delay lines; call at episode start.
    pub fn reset(&mut self) {
        self.state = [[0.0; 2]; ACTION_DIM];
    }

    pub fn apply(&mut self, raw: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
        let c = self.coeffs;
        let mut out = [0.0; ACTION_DIM];
        for (i, (&x, s)) in raw.iter().zip(self.state.iter_mut()).enumerate() {
            let y = c.b0 * x + s[0];
            s[0] = c.b1 * x - c.a1 * y + s[1];
            s[1] = c.b2 * x - c.a2 * y;
            out[i] = y;
        }
        out
    }
}

/// Filters a scalar signal through a fresh biquad; test and analysis helper.
pub fn filter_signal(coeffs: ButterworthCoeffs, signal: &[f64]) -> Vec<f64> {
    let mut filter = ActionFilter::new(coeffs);
    signal
        .iter()
        .map(|&x| {
            let mut frame = [0.0; ACTION_DIM];
            frame[0] = x;
            filter.apply(&frame)[0]
        })
        .collect()
}
