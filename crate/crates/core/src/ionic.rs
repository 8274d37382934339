//! Ionic current models `f(u, w)` and gating dynamics `g(u, w)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local reaction terms of `u_t + A u + f(u, w) = s`, `w_t + g(u, w) = 0`.
pub trait IonicModel: Send + Sync {
    /// Number of gating variables `m >= 1`.
    fn gating_dim(&self) -> usize;
    /// Ionic current `f(u, w)`.
    fn current(&self, u: f64, w: &[f64]) -> f64;
    /// Writes `g(u, w)` into `out` (length `m`).
    fn gating_rate(&self, u: f64, w: &[f64], out: &mut [f64]);
    /// Trust radius `R`: stepping aborts once `|u|` or `|w|` leaves it.
    fn trust_radius(&self) -> f64;
    fn name(&self) -> &'static str;
}

/// `f = c u (u - a)(u - 1) + alpha w`, `g = -beta u + gamma w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitzHughNagumo {
    #[serde(default = "defaults::c")]
    pub c: f64,
    #[serde(default = "defaults::a")]
    pub a: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::trust")]
    pub trust_radius: f64,
}

mod defaults {
    pub fn c() -> f64 {
        1.0
    }
    pub fn a() -> f64 {
        0.1
    }
    pub fn alpha() -> f64 {
        1.0
    }
    pub fn beta() -> f64 {
        0.005
    }
    pub fn gamma() -> f64 {
        0.01
    }
    pub fn trust() -> f64 {
        1e3
    }
}

impl Default for FitzHughNagumo {
    fn default() -> Self {
        Self {
            c: defaults::c(),
            a: defaults::a(),
            alpha: defaults::alpha(),
            beta: defaults::beta(),
            gamma: defaults::gamma(),
            trust_radius: defaults::trust(),
        }
    }
}

impl FitzHughNagumo {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.c, self.a, self.alpha, self.beta, self.gamma].iter().all(|v| v.is_finite());
        if !finite || self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 || self.c < 0.0 {
            return Err(Error::InvalidArgument("FitzHugh-Nagumo needs finite c, alpha, beta, gamma >= 0".into()));
        }
        if !(self.trust_radius > 0.0) {
            return Err(Error::InvalidArgument("trust radius must be positive".into()));
        }
        Ok(())
    }

    pub fn cubic(&self, u: f64) -> f64 {
        self.c * u * (u - self.a) * (u - 1.0)
    }
}

impl IonicModel for FitzHughNagumo {
    fn gating_dim(&self) -> usize {
        1
    }

    fn current(&self, u: f64, w: &[f64]) -> f64 {
        self.cubic(u) + self.alpha * w[0]
    }

    fn gating_rate(&self, u: f64, w: &[f64], out: &mut [f64]) {
        out[0] = -self.beta * u + self.gamma * w[0];
    }

    fn trust_radius(&self) -> f64 {
        self.trust_radius
    }

    fn name(&self) -> &'static str {
        "fitzhugh-nagumo"
    }
}

/// `f = g = 0`: the linear flow with one inert gating variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Passive {
    pub trust_radius: f64,
}

impl Default for Passive {
    fn default() -> Self {
        Self { trust_radius: 1e3 }
    }
}

impl IonicModel for Passive {
    fn gating_dim(&self) -> usize {
        1
    }

    fn current(&self, _u: f64, _w: &[f64]) -> f64 {
        0.0
    }

    fn gating_rate(&self, _u: f64, _w: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn trust_radius(&self) -> f64 {
        self.trust_radius
    }

    fn name(&self) -> &'static str {
        "passive"
    }
}

/// Serializable choice of preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum IonicConfig {
    FitzhughNagumo(FitzHughNagumo),
    Passive(Passive),
}

impl Default for IonicConfig {
    fn default() -> Self {
        Self::FitzhughNagumo(FitzHughNagumo::default())
    }
}

impl IonicConfig {
    pub fn build(&self) -> Result<Box<dyn IonicModel>> {
        match self {
            Self::FitzhughNagumo(m) => {
                m.validate()?;
                Ok(Box::new(*m))
            }
            Self::Passive(p) => {
                if !(p.trust_radius > 0.0) {
                    return Err(Error::InvalidArgument("trust radius must be positive".into()));
                }
                Ok(Box::new(*p))
            }
        }
    }
}
