//! Channel model primitives: the Gaussian conditional law of Bob's
//! homodyne outcome, the sign-decision error probability and the Shannon
//! information shared by Alice and Bob at an announced magnitude pair.
//!
//! Everything is in shot-noise units: the vacuum quadrature variance is 1.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// Lossy channel with excess Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    eta: f64,
    xi: f64,
}

impl Channel {
    /// `eta` is the transmission in `(0, 1]`, `xi` the excess noise variance
    /// (at least zero).
    pub fn new(eta: f64, xi: f64) -> Result<Self> {
        if !eta.is_finite() || !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!(
                "transmission eta must lie in (0, 1], got {eta}"
            )));
        }
        if !xi.is_finite() || xi < 0.0 {
            return Err(Error::invalid(format!(
                "excess noise xi must be finite and >= 0, got {xi}"
            )));
        }
        Ok(Self { eta, xi })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Variance of Bob's outcome given Alice's encoding: `1 + xi`.
    pub fn noise_variance(&self) -> f64 {
        1.0 + self.xi
    }
}

/// Alice's Gaussian encoding variance, shared by both quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    v_a: f64,
}

impl Modulation {
    pub fn new(v_a: f64) -> Result<Self> {
        if !v_a.is_finite() || v_a <= 0.0 {
            return Err(Error::invalid(format!(
                "modulation variance must be finite and > 0, got {v_a}"
            )));
        }
        Ok(Self { v_a })
    }

    pub fn v_a(&self) -> f64 {
        self.v_a
    }

    /// Variance of Bob's outcome, `eta * V_A + 1 + xi`.
    pub fn bob_variance(&self, ch: &Channel) -> f64 {
        ch.eta * self.v_a + 1.0 + ch.xi
    }
}

/// Publicly announced magnitudes `(|S_A|, |m_B|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnouncedPair {
    abs_s: f64,
    abs_m: f64,
}

impl AnnouncedPair {
    pub fn new(abs_s: f64, abs_m: f64) -> Result<Self> {
        if !abs_s.is_finite() || abs_s < 0.0 || !abs_m.is_finite() || abs_m < 0.0 {
            return Err(Error::invalid(format!(
                "announced magnitudes must be finite and >= 0, got ({abs_s}, {abs_m})"
            )));
        }
        Ok(Self { abs_s, abs_m })
    }

    /// Builds the pair from signed values by taking magnitudes.
    pub fn from_signed(s: f64, m: f64) -> Result<Self> {
        Self::new(s.abs(), m.abs())
    }

    pub fn abs_s(&self) -> f64 {
        self.abs_s
    }

    pub fn abs_m(&self) -> f64 {
        self.abs_m
    }
}

/// `phi(x) = [(1+x) log2(1+x) + (1-x) log2(1-x)] / 2` on `[0, 1]`.
///
/// Equivalently `1 - H2((1 + x) / 2)`: the Shannon capacity of a binary
/// symmetric channel whose correlation is `x`.
pub fn phi(x: f64) -> Result<f64> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("phi is defined on [0, 1], got {x}")));
    }
    Ok(phi_unchecked(x))
}

pub(crate) fn phi_unchecked(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if 1.0 - x < 1e-15 {
        return 1.0;
    }
    if x < 0.05 {
        // sum_k x^{2k} / (2k (2k - 1)), divided by ln 2; avoids the
        // cancellation of the two linear terms.
        let x2 = x * x;
        let mut term = x2;
        let mut acc = 0.0;
        for k in 1..=10 {
            let kk = 2.0 * k as f64;
            acc += term / (kk * (kk - 1.0));
            term *= x2;
        }
        return acc / LN_2;
    }
    0.5 * ((1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p()) / LN_2
}

/// Binary entropy in bits; arguments are clamped to `[0, 1]`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -(p * p.ln() + (1.0 - p) * (-p).ln_1p()) / LN_2
}

/// Natural log of `H2(p)` for `0 < p <= 1/2`, given `ln p`. Stays finite
/// when `p` itself would underflow.
pub(crate) fn ln_binary_entropy(ln_p: f64) -> f64 {
    if ln_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let p = ln_p.exp();
    // ln(1 - p) / p, with its series once p is tiny.
    let r = if p > 1e-8 { (-p).ln_1p() / p } else { -1.0 - 0.5 * p };
    ln_p + ((-ln_p - (1.0 - p) * r) / LN_2).ln()
}

/// `2 sqrt(eta) |S m| / (1 + xi)`: the log-likelihood ratio between the
/// matching and mismatching sign hypotheses.
pub(crate) fn sign_llr(ch: &Channel, pt: &AnnouncedPair) -> f64 {
    2.0 * ch.eta.sqrt() * pt.abs_s * pt.abs_m / ch.noise_variance()
}

/// `ln(1 / (1 + e^x))` without overflow.
pub(crate) fn ln_logistic_tail(x: f64) -> f64 {
    -(x.max(0.0) + (-x.abs()).exp().ln_1p())
}

/// Natural log of the sign-error probability.
pub fn ln_error_probability(ch: &Channel, pt: &AnnouncedPair) -> f64 {
    ln_logistic_tail(sign_llr(ch, pt))
}

/// Probability that Bob's sign differs from Alice's,
/// `1 / (1 + exp(2 sqrt(eta) |S m| / (1 + xi)))`.
///
/// Evaluated through its logarithm; the result is clamped to the smallest
/// positive normal double instead of underflowing to zero.
pub fn error_probability(ch: &Channel, pt: &AnnouncedPair) -> f64 {
    ln_error_probability(ch, pt).exp().max(f64::MIN_POSITIVE)
}

/// Shannon information between Alice's and Bob's sign bits, `phi(1 - 2 P_e)`.
///
/// Computed as `1 - H2(P_e)`, which is the same function but keeps full
/// relative precision in the deficit when `P_e` is small.
pub fn mutual_info_ab(ch: &Channel, pt: &AnnouncedPair) -> f64 {
    let ln_pe = ln_error_probability(ch, pt);
    1.0 - binary_entropy(ln_pe.exp())
}

pub(crate) fn gaussian_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / variance).exp() / (2.0 * PI * variance).sqrt()
}

/// `p(m_B | S_A)`: Gaussian in `m_b` with mean `sqrt(eta) s_a` and variance
/// `1 + xi`.
pub fn conditional_density(ch: &Channel, s_a: f64, m_b: f64) -> f64 {
    gaussian_pdf(m_b, ch.eta.sqrt() * s_a, ch.noise_variance())
}

/// Joint density `p(S_A) p(m_B | S_A)` with `S_A ~ N(0, V_A)`.
pub fn joint_density(ch: &Channel, modulation: &Modulation, s_a: f64, m_b: f64) -> f64 {
    gaussian_pdf(s_a, 0.0, modulation.v_a) * conditional_density(ch, s_a, m_b)
}
