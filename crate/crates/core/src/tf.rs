//! Piecewise-linear RGBA transfer functions.

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const RAMP_SIZE: usize = 256;

/// Maps a scalar value to color and opacity through a 256-entry ramp spread
/// evenly over `domain`. Values outside the domain clamp to the end entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub domain: [f64; 2],
    pub rgba: Vec<[f32; 4]>,
}

impl TransferFunction {
    pub fn new(domain: [f64; 2], rgba: Vec<[f32; 4]>) -> Result<Self, Error> {
        let tf = Self { domain, rgba };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "transfer function domain must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if self.rgba.len() != RAMP_SIZE {
            return Err(Error::InvalidParameter(format!(
                "transfer function needs {RAMP_SIZE} rgba entries, got {}",
                self.rgba.len()
            )));
        }
        if self.rgba.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter(
                "transfer function channels must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let tf: TransferFunction = serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("transfer function json: {e}")))?;
        tf.validate()?;
        Ok(tf)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transfer function serializes")
    }

    /// Same color and opacity everywhere.
    pub fn constant(domain: [f64; 2], rgba: [f32; 4]) -> Self {
        Self { domain, rgba: vec![rgba; RAMP_SIZE] }
    }

    pub fn transparent(domain: [f64; 2]) -> Self {
        Self::constant(domain, [0.0; 4])
    }

    /// Blue-to-red color ramp with opacity rising linearly to `max_alpha`.
    pub fn cool_warm(domain: [f64; 2], max_alpha: f32) -> Self {
        let rgba = (0..RAMP_SIZE)
            .map(|i| {
                let t = i as f32 / (RAMP_SIZE - 1) as f32;
                [t, 0.3 + 0.4 * (1.0 - (2.0 * t - 1.0).abs()), 1.0 - t, max_alpha * t]
            })
            .collect();
        Self { domain, rgba }
    }

    /// Continuous ramp coordinate of `v`, clamped to `[0, 255]`.
    fn position(&self, v: f64) -> f64 {
        let [lo, hi] = self.domain;
        let x = (v - lo) / (hi - lo) * (RAMP_SIZE - 1) as f64;
        if x.is_nan() {
            0.0
        } else {
            x.clamp(0.0, (RAMP_SIZE - 1) as f64)
        }
    }

    fn lerp_at(&self, x: f64) -> [f32; 4] {
        let i = (x.floor() as usize).min(RAMP_SIZE - 2);
        let f = (x - i as f64) as f32;
        let (a, b) = (self.rgba[i], self.rgba[i + 1]);
        std::array::from_fn(|c| a[c] + (b[c] - a[c]) * f)
    }

    pub fn eval(&self, v: f64) -> [f32; 4] {
        self.lerp_at(self.position(v))
    }

    /// Largest opacity the ramp takes anywhere in `[min, max]` (after
    /// clamping to the domain): the interpolated end points plus every ramp
    /// entry strictly between them. Never under-estimates.
    pub fn max_opacity(&self, min: f64, max: f64) -> f64 {
        debug_assert!(min <= max);
        let xa = self.position(min);
        let xb = self.position(max);
        let mut m = self.lerp_at(xa)[3].max(self.lerp_at(xb)[3]);
        let first = xa.ceil() as usize;
        let last = xb.floor() as usize;
        for e in self.rgba.iter().take(last + 1).skip(first) {
            m = m.max(e[3]);
        }
        m as f64
    }
}
