//! Ambient dimension/order pair and the closed-form constants attached to it.
//!
//! Everything downstream (bubble profiles, interaction strengths, norm
//! weights, regime-dependent estimates) is parameterized by the pair `(n, s)`
//! with `1 <= n <= 3` and `0 < s < n/2`. This module computes the critical
//! exponent, the bubble amplitude, the Riesz constant, and the regime split,
//! and caches them in an immutable value object.

use crate::error::{Error, Result};
use crate::gamma::gamma;
use serde::{Deserialize, Serialize};

/// Regime split driven by the critical exponent `p = (n+2s)/(n-2s)`:
/// `High` for p < 2 (equivalently n > 6s), `Critical` for p = 2 (n = 6s),
/// `Low` for p > 2 (2s < n < 6s). The nonlinearity is sub-quadratic in the
/// High regime, which changes both the correction scaling and the norms the
/// linear theory is phrased in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    High,
    Critical,
    Low,
}

/// Classification tolerance on p - 2. Absorbs the rounding of inputs like
/// s = n/6 that are not exactly representable.
const REGIME_TOL: f64 = 1e-9;

/// Dimension, fractional order, and derived constants.
///
/// Immutable after construction; cheap to copy and safe to share across
/// threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    /// Space dimension, 1 to 3.
    pub n: usize,
    /// Fractional order, in (0, n/2).
    pub s: f64,
    /// Critical exponent (n+2s)/(n-2s).
    pub p: f64,
    /// Amplitude normalizing the standard profile so that (-Lap)^s U = U^p.
    pub alpha_ns: f64,
    /// Constant of the convolution kernel inverting (-Lap)^s.
    pub gamma_ns: f64,
    /// Regime split (sign of p - 2).
    pub regime: Regime,
}

impl SobolevParams {
    /// Builds the parameter object for dimension `n` and order `s`.
    ///
    /// # Errors
    /// Rejects `n` outside 1..=3 and `s` outside the open interval (0, n/2).
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::BadDimension(n));
        }
        let limit = n as f64 / 2.0;
        if !(s > 0.0 && s < limit) || !s.is_finite() {
            return Err(Error::BadOrder { s, n, limit });
        }
        let nf = n as f64;
        let p = (nf + 2.0 * s) / (nf - 2.0 * s);
        // Amplitude: 2^{(n-2s)/2} [Gamma((n+2s)/2)/Gamma((n-2s)/2)]^{(n-2s)/(4s)}.
        let ratio = gamma((nf + 2.0 * s) / 2.0) / gamma((nf - 2.0 * s) / 2.0);
        let alpha_ns = 2f64.powf((nf - 2.0 * s) / 2.0) * ratio.powf((nf - 2.0 * s) / (4.0 * s));
        // Riesz constant: Gamma((n-2s)/2) / (pi^{n/2} 2^{2s} Gamma(s)).
        let gamma_ns = gamma((nf - 2.0 * s) / 2.0)
            / (std::f64::consts::PI.powf(nf / 2.0) * 2f64.powf(2.0 * s) * gamma(s));
        let regime = if (p - 2.0).abs() <= REGIME_TOL {
            Regime::Critical
        } else if p < 2.0 {
            Regime::High
        } else {
            Regime::Low
        };
        Ok(Self { n, s, p, alpha_ns, gamma_ns, regime })
    }

    /// Half the tail decay rate: m = (n-2s)/2. The standard profile decays
    /// like |x|^{-2m} and its dilation kernel is m U (1-r^2)/(1+r^2) at unit
    /// scale.
    pub fn m(&self) -> f64 {
        (self.n as f64 - 2.0 * self.s) / 2.0
    }

    /// Closed-form integral of U^p over all of space at unit scale; for a
    /// bubble of inverse scale lambda the integral is this value times
    /// lambda^{-(n-2s)/2}. Used as the far-field mass carried by the
    /// renormalized periodization and as a quadrature oracle.
    pub fn int_u_p(&self) -> f64 {
        // In 1d: alpha^p sqrt(pi) Gamma(s)/Gamma(s+1/2); generally
        // alpha^p pi^{n/2} Gamma((n+2s)/2 - n/2)/Gamma((n+2s)/2).
        let nf = self.n as f64;
        let q = (nf + 2.0 * self.s) / 2.0;
        self.alpha_ns.powf(self.p) * std::f64::consts::PI.powf(nf / 2.0) * gamma(q - nf / 2.0)
            / gamma(q)
    }

    /// Closed-form integral of U^{p+1} over all of space, which also equals
    /// the squared homogeneous Sobolev norm of the profile.
    pub fn int_u_p1(&self) -> f64 {
        // (p+1) m = n exactly, so the integrand is (1+|x|^2)^{-n} up to the
        // amplitude and the Beta integral is independent of s.
        let nf = self.n as f64;
        self.alpha_ns.powf(self.p + 1.0) * std::f64::consts::PI.powf(nf / 2.0)
            * gamma(nf / 2.0)
            / gamma(nf)
    }
}
