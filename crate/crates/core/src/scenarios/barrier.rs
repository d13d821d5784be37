//! Smooth potential barriers used as continuous-dynamics beam splitters.
//!
//! Transmission is computed by integrating the stationary Schrödinger
//! equation across the barrier, then averaged over the Gaussian momentum
//! distribution of the incident packet. The barrier height is calibrated to a
//! target band-averaged transmission by bisection.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wavepacket::Grid;

/// `V(x) = height · exp(−x²/2w²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub height: f64,
    pub width: f64,
}

/// Transmission and reflection amplitudes at one wave number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scattering {
    pub t: Complex64,
    pub r: Complex64,
}

impl Barrier {
    pub fn potential(&self, x: f64) -> f64 {
        self.height * (-x * x / (2.0 * self.width * self.width)).exp()
    }

    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.points().map(|x| self.potential(x)).collect()
    }

    /// Amplitudes for a plane wave `e^{ikx}` incident from the left.
    pub fn scattering(&self, k: f64) -> Scattering {
        if self.height == 0.0 {
            return Scattering {
                t: Complex64::new(1.0, 0.0),
                r: Complex64::new(0.0, 0.0),
            };
        }
        let a = 10.0 * self.width;
        let steps = 2000;
        let h = -2.0 * a / steps as f64;
        let i = Complex64::i();
        let e = 0.5 * k * k;
        // y = (ψ, ψ'), integrated from +a (pure transmitted wave) down to −a
        let mut x = a;
        let mut y = [(i * k * a).exp(), i * k * (i * k * a).exp()];
        let f = |x: f64, y: [Complex64; 2]| [y[1], y[0] * (2.0 * (self.potential(x) - e))];
        for _ in 0..steps {
            let k1 = f(x, y);
            let k2 = f(x + h / 2.0, [y[0] + k1[0] * (h / 2.0), y[1] + k1[1] * (h / 2.0)]);
            let k3 = f(x + h / 2.0, [y[0] + k2[0] * (h / 2.0), y[1] + k2[1] * (h / 2.0)]);
            let k4 = f(x + h, [y[0] + k3[0] * h, y[1] + k3[1] * h]);
            for c in 0..2 {
                y[c] += (k1[c] + k2[c] * 2.0 + k3[c] * 2.0 + k4[c]) * (h / 6.0);
            }
            x += h;
        }
        let incoming = (y[0] + y[1] / (i * k)) * (-i * k * x).exp() / 2.0;
        let reflected = (y[0] - y[1] / (i * k)) * (i * k * x).exp() / 2.0;
        Scattering {
            t: 1.0 / incoming,
            r: reflected / incoming,
        }
    }

    /// Transmission probability averaged over a Gaussian band `N(k0, σ_k²)`.
    pub fn band_transmission(&self, k0: f64, sigma_k: f64) -> f64 {
        let nodes = 81;
        let span = 5.0 * sigma_k;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..nodes {
            let k = k0 - span + 2.0 * span * j as f64 / (nodes - 1) as f64;
            if k <= 0.0 {
                continue;
            }
            let w = (-(k - k0).powi(2) / (2.0 * sigma_k * sigma_k)).exp();
            num += w * self.scattering(k).t.norm_sqr();
            den += w;
        }
        num / den
    }

    /// Height whose band-averaged transmission equals `target`.
    pub fn calibrate(width: f64, k0: f64, sigma_k: f64, target: f64) -> Result<Self> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmission {target} outside (0, 1]"
            )));
        }
        if target == 1.0 {
            return Ok(Self { height: 0.0, width });
        }
        let trans = |height: f64| Self { height, width }.band_transmission(k0, sigma_k);
        let mut lo = 0.0;
        let mut hi = 0.5 * k0 * k0;
        while trans(hi) > target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 * k0 * k0 {
                return Err(Error::InvalidParameter(format!(
                    "transmission {target} not reachable"
                )));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if trans(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            height: 0.5 * (lo + hi),
            width,
        })
    }
}
