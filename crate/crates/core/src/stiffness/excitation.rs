use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationParams {
    /// N.
    pub amplitude: f64,
    /// N.
    pub bias: f64,
    /// Hz.
    pub frequency: f64,
    /// Lower bound on the commanded normal force, N. Keeps the probe loaded
    /// through the troughs so the contact latch never releases.
    pub floor: f64,
}

impl Default for ExcitationParams {
    fn default() -> Self {
        Self {
            amplitude: 1.8,
            bias: 0.65,
            frequency: 2.0,
            floor: 0.8,
        }
    }
}

impl ExcitationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.amplitude >= 0.0) {
            return Err("excitation amplitude must be non-negative".into());
        }
        if !(self.frequency > 0.0) {
            return Err("excitation frequency must be positive".into());
        }
        if !(self.floor >= 0.0) {
            return Err("excitation floor must be non-negative".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Force actually handed to the controller: the clamped sinusoid, raised to `floor`.
    pub fn command(&self, t: f64) -> f64 {
        sinusoid_reference(t, self).max(self.floor)
    }
}

/// `bias + amplitude sin(2π f t)`, never negative (the probe cannot pull).
pub fn sinusoid_reference(t: f64, prm: &ExcitationParams) -> f64 {
    (prm.bias + prm.amplitude * (2.0 * PI * prm.frequency * t).sin()).max(0.0)
}
