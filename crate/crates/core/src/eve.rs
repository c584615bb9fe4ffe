//! Eve's side of the entangling-cloner attack.
//!
//! Eve replaces the lossy line by a beamsplitter of transmission `eta` whose
//! second input is one arm of a two-mode squeezed (EPR) state. Once Alice and
//! Bob announce `(|S_A|, |m_B|)`, Eve's two modes (the kept EPR arm `E1` and
//! the tapped beamsplitter output `E2`) collapse to one of four unnormalised
//! pure states `|psi_b^a>`, labelled by Alice's sign bit `a` and Bob's sign
//! bit `b`. All four wavefunctions share one Gaussian quadratic form and
//! differ only in their linear terms, so every overlap has a closed form.
//!
//! Writing `y` for the `E2` position and `u` for the `E1` position, with
//! `alpha = (-1)^a |S_A|`, `beta = (-1)^b |m_B|`, `c = (1 - eta + xi) / (1 - eta)`
//! and `d = sqrt(c^2 - 1)`, the exponent of `psi_b^a(y, u)` is `-Q/4` with
//!
//! ```text
//! Q = z^T K z - 2 h^T z + k,    z = (y, u)
//! K = [[1 - eta + c eta, -d sqrt(eta)], [-d sqrt(eta), c]]     det K = 1 + xi
//! h = (A sqrt(1 - eta) - c sqrt(eta) B, d B),    k = A^2 + c B^2
//! A = beta sqrt(eta) - alpha,    B = beta sqrt(1 - eta)
//! ```
//!
//! and the overlap of two such states is
//! `exp(h^T K^-1 h / 8 - k / 4) / sqrt(2 pi det K)` with `h`, `k` summed over
//! the pair. Two of the cross overlaps reduce to simple expressions:
//!
//! ```text
//! <psi_0^0|psi_0^1> = exp(-(m^2 + (1 + xi) S^2) / (2 (1 + xi))) / sqrt(2 pi (1 + xi))
//! <psi_0^0|psi_1^0> = exp(-((1 + xi)^2 m^2 + eta S^2) / (2 (1 + xi))) / sqrt(2 pi (1 + xi))
//! ```
//!
//! The first pair differs in Alice's bit, the second in Bob's. They coincide
//! on the critical line `m = S sqrt((1 + xi - eta) / ((1 + xi)^2 - 1))`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::info_theory::{
    binary_entropy, conditional_density, ln_binary_entropy, ln_error_probability, phi_unchecked,
    AnnouncedPair, Channel,
};
use crate::numerics::{symmetric_eigenvalues, symmetric_eigenvalues_dyn, Quadrature};

/// Alice's sign bit `a` and Bob's sign bit `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitPair {
    a: u8,
    b: u8,
}

impl BitPair {
    /// Gram matrix order: (0,0), (0,1), (1,0), (1,1).
    pub const ALL: [BitPair; 4] = [
        BitPair { a: 0, b: 0 },
        BitPair { a: 0, b: 1 },
        BitPair { a: 1, b: 0 },
        BitPair { a: 1, b: 1 },
    ];

    pub fn new(a: u8, b: u8) -> Result<Self> {
        if a > 1 || b > 1 {
            return Err(Error::invalid(format!("bits must be 0 or 1, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn a(self) -> u8 {
        self.a
    }

    pub fn b(self) -> u8 {
        self.b
    }

    pub fn index(self) -> usize {
        (2 * self.a + self.b) as usize
    }

    /// Global bit flip `(a, b) -> (1 - a, 1 - b)`.
    pub fn flipped(self) -> Self {
        Self {
            a: 1 - self.a,
            b: 1 - self.b,
        }
    }

    fn sign_a(self) -> f64 {
        if self.a == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn sign_b(self) -> f64 {
        if self.b == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Party whose bit Eve tries to learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Alice,
    Bob,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Alice => "alice",
            Target::Bob => "bob",
        })
    }
}

/// Eve's measurement strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attack {
    /// Symbol-by-symbol measurement; bounded by the Levitin formula.
    Individual,
    /// Joint measurement after storing the states; bounded by Holevo's
    /// quantity.
    Collective,
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attack::Individual => "individual",
            Attack::Collective => "collective",
        })
    }
}

/// Channel-dependent part of the cloner wavefunctions. Build once per
/// channel and evaluate at many announced points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClonerModel {
    channel: Channel,
    v_s: f64,
    c: f64,
    d: f64,
    sqrt_eta: f64,
    sqrt_loss: f64,
    k_inv: [[f64; 2]; 2],
    ln_prefactor: f64,
}

impl ClonerModel {
    /// Fails with [`Error::ModelDomain`] for `eta = 1` with `xi > 0`: without
    /// loss there is no beamsplitter tap through which the noise could be
    /// injected.
    pub fn new(channel: Channel) -> Result<Self> {
        let (eta, xi) = (channel.eta(), channel.xi());
        let (c, d) = if xi == 0.0 {
            // Vacuum EPR input.
            (1.0, 0.0)
        } else if eta >= 1.0 {
            return Err(Error::ModelDomain(format!(
                "entangling cloner undefined for eta = 1 with xi = {xi} > 0"
            )));
        } else {
            let excess = xi / (1.0 - eta); // c - 1
            let c = 1.0 + excess;
            (c, (excess * (c + 1.0)).sqrt())
        };
        let sqrt_eta = eta.sqrt();
        let sqrt_loss = (1.0 - eta).max(0.0).sqrt();
        let k = [
            [1.0 - eta + c * eta, -d * sqrt_eta],
            [-d * sqrt_eta, c],
        ];
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        let k_inv = [
            [k[1][1] / det, -k[0][1] / det],
            [-k[1][0] / det, k[0][0] / det],
        ];
        Ok(Self {
            channel,
            v_s: c + d,
            c,
            d,
            sqrt_eta,
            sqrt_loss,
            k_inv,
            ln_prefactor: -0.5 * (2.0 * PI * det).ln(),
        })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    /// Squeezing parameter `V_s >= 1` solving `(V_s + 1/V_s) / 2 = c`.
    pub fn v_s(&self) -> f64 {
        self.v_s
    }

    fn linear_terms(&self, pt: &AnnouncedPair, state: BitPair) -> ([f64; 2], f64) {
        let alpha = state.sign_a() * pt.abs_s();
        let beta = state.sign_b() * pt.abs_m();
        let big_a = beta * self.sqrt_eta - alpha;
        let big_b = beta * self.sqrt_loss;
        (
            [
                big_a * self.sqrt_loss - self.c * self.sqrt_eta * big_b,
                self.d * big_b,
            ],
            big_a * big_a + self.c * big_b * big_b,
        )
    }

    /// Natural log of the unnormalised overlap `<psi_i|psi_j>`.
    pub fn ln_overlap(&self, pt: &AnnouncedPair, i: BitPair, j: BitPair) -> f64 {
        let (hi, ki) = self.linear_terms(pt, i);
        let (hj, kj) = self.linear_terms(pt, j);
        let h = [hi[0] + hj[0], hi[1] + hj[1]];
        let quad = h[0] * (self.k_inv[0][0] * h[0] + self.k_inv[0][1] * h[1])
            + h[1] * (self.k_inv[1][0] * h[0] + self.k_inv[1][1] * h[1]);
        self.ln_prefactor + quad / 8.0 - (ki + kj) / 4.0
    }

    /// Natural log of the normalised overlap. The prefactor and the `k`
    /// terms cancel against the norms, leaving `-(h_i - h_j)^T K^-1 (h_i - h_j) / 8`,
    /// which is evaluated directly to avoid cancelling large logs.
    pub fn ln_normalized_overlap(&self, pt: &AnnouncedPair, i: BitPair, j: BitPair) -> f64 {
        let (hi, _) = self.linear_terms(pt, i);
        let (hj, _) = self.linear_terms(pt, j);
        let h = [hi[0] - hj[0], hi[1] - hj[1]];
        let quad = h[0] * (self.k_inv[0][0] * h[0] + self.k_inv[0][1] * h[1])
            + h[1] * (self.k_inv[1][0] * h[0] + self.k_inv[1][1] * h[1]);
        -(quad / 8.0).max(0.0)
    }

    pub fn gram(&self, pt: &AnnouncedPair) -> GramMatrix4 {
        let mut ln = [[0.0; 4]; 4];
        for i in BitPair::ALL {
            for j in BitPair::ALL {
                if j.index() >= i.index() {
                    let v = self.ln_overlap(pt, i, j);
                    ln[i.index()][j.index()] = v;
                    ln[j.index()][i.index()] = v;
                }
            }
        }
        GramMatrix4 { ln }
    }

    /// Normalised overlaps and error probability at one announced point.
    pub fn overlaps(&self, pt: &AnnouncedPair) -> StateOverlaps {
        let [s00, s01, s10, s11] = BitPair::ALL;
        let ln_f1 = self.ln_normalized_overlap(pt, s00, s11);
        let ln_f2 = self.ln_normalized_overlap(pt, s01, s10);
        let ln_g_bob = self.ln_normalized_overlap(pt, s00, s01);
        let ln_g_alice = self.ln_normalized_overlap(pt, s00, s10);
        let ln_pe = ln_error_probability(&self.channel, pt);
        StateOverlaps {
            ln_pe,
            pe: ln_pe.exp(),
            ln_f1,
            ln_f2,
            f1: ln_f1.exp(),
            f2: ln_f2.exp(),
            g_alice: ln_g_alice.exp(),
            g_bob: ln_g_bob.exp(),
            ln_g_alice,
            ln_g_bob,
        }
    }
}

/// Parameters of Eve's conditional states at one announced point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveWavefunctionParams {
    pub model: ClonerModel,
    pub point: AnnouncedPair,
}

impl EveWavefunctionParams {
    pub fn new(channel: Channel, point: AnnouncedPair) -> Result<Self> {
        Ok(Self {
            model: ClonerModel::new(channel)?,
            point,
        })
    }

    pub fn v_s(&self) -> f64 {
        self.model.v_s
    }

    /// `psi_b^a(y, u)` evaluated term by term from the two-mode integral
    /// representation: `y` labels the tapped mode `E2`, `u` the kept EPR arm
    /// `E1`. Used only by the quadrature oracle.
    fn wavefunction(&self, state: BitPair, y: f64, u: f64) -> f64 {
        let ch = self.model.channel;
        let eta = ch.eta();
        let alpha = state.sign_a() * self.point.abs_s();
        let beta = state.sign_b() * self.point.abs_m();
        // E2 label y = -beta sqrt((1-eta)/eta) - (x2 - x3) / sqrt(2 eta); E1 label u = (x2 + x3) / sqrt 2.
        let v = -eta.sqrt() * y - beta * (1.0 - eta).sqrt();
        let x2 = (u + v) / 2f64.sqrt();
        let x3 = (u - v) / 2f64.sqrt();
        let shift = beta / eta.sqrt() - alpha - ((1.0 - eta) / (2.0 * eta)).sqrt() * (x3 - x2);
        let v_s = self.model.v_s;
        let exponent = -0.25 * (shift * shift + x2 * x2 * v_s + x3 * x3 / v_s);
        // Changing the integration variable from v to y contributes sqrt(eta).
        let jacobian = eta.sqrt();
        jacobian / (eta.sqrt() * (2.0 * PI).powf(0.75)) * exponent.exp()
    }
}

/// Unnormalised overlap `<psi_i|psi_j>` from the closed form.
pub fn overlap(params: &EveWavefunctionParams, i: BitPair, j: BitPair) -> f64 {
    params.model.ln_overlap(&params.point, i, j).exp()
}

/// Overlap by direct two-dimensional adaptive quadrature of the product of
/// the position-space wavefunctions.
///
/// The integrand's Gaussian centre and covariance are read off from finite
/// differences of its logarithm (exact for a quadratic). The integral runs
/// over nine standard deviations along each principal axis. Returns [`Error::NonConvergence`] if refinement stalls above `tol`.
pub fn oracle_overlap(params: &EveWavefunctionParams, i: BitPair, j: BitPair, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let ln_f = |y: f64, u: f64| {
        (params.wavefunction(i, y, u).ln()) + (params.wavefunction(j, y, u).ln())
    };
    // Second-order central differences around the origin.
    let h = 1.0;
    let f0 = ln_f(0.0, 0.0);
    let (fyp, fym) = (ln_f(h, 0.0), ln_f(-h, 0.0));
    let (fup, fum) = (ln_f(0.0, h), ln_f(0.0, -h));
    let (fpp, fpm, fmp, fmm) = (ln_f(h, h), ln_f(h, -h), ln_f(-h, h), ln_f(-h, -h));
    if ![f0, fyp, fym, fup, fum, fpp, fpm, fmp, fmm].iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(
            "wavefunction underflow while locating the integrand peak".into(),
        ));
    }
    let grad = [(fyp - fym) / (2.0 * h), (fup - fum) / (2.0 * h)];
    let hyy = (fyp - 2.0 * f0 + fym) / (h * h);
    let huu = (fup - 2.0 * f0 + fum) / (h * h);
    let hyu = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    // Precision matrix P = -Hessian; centre solves P z = grad.
    let (pyy, puu, pyu) = (-hyy, -huu, -hyu);
    let det = pyy * puu - pyu * pyu;
    if !(pyy > 0.0 && det > 0.0) {
        return Err(Error::Numerical("integrand is not a decaying Gaussian".into()));
    }
    let centre = [
        (puu * grad[0] - pyu * grad[1]) / det,
        (-pyu * grad[0] + pyy * grad[1]) / det,
    ];
    // Integrate in the principal frame of the fitted Gaussian, scaled to unit
    // width, so that strongly squeezed ridges are not missed by the panels.
    let theta = 0.5 * (2.0 * pyu).atan2(pyy - puu);
    let (sin, cos) = theta.sin_cos();
    let lam1 = pyy * cos * cos + 2.0 * pyu * sin * cos + puu * sin * sin;
    let lam2 = pyy * sin * sin - 2.0 * pyu * sin * cos + puu * cos * cos;
    if !(lam1 > 0.0 && lam2 > 0.0) {
        return Err(Error::Numerical("integrand is not a decaying Gaussian".into()));
    }
    let (sd1, sd2) = (lam1.sqrt().recip(), lam2.sqrt().recip());
    let to_yu = |w1: f64, w2: f64| {
        (
            centre[0] + cos * sd1 * w1 - sin * sd2 * w2,
            centre[1] + sin * sd1 * w1 + cos * sd2 * w2,
        )
    };
    let jacobian = sd1 * sd2;
    let quad = Quadrature::new(0.05 * tol / jacobian, 1e-13).with_max_intervals(400);
    let est = quad.integrate_2d(
        |w1, w2| {
            let (y, u) = to_yu(w1, w2);
            params.wavefunction(i, y, u) * params.wavefunction(j, y, u)
        },
        (-9.0, 9.0),
        (-9.0, 9.0),
    );
    let est = crate::numerics::Estimate {
        value: est.value * jacobian,
        error: est.error * jacobian,
        ..est
    };
    if !est.converged || est.error > tol {
        return Err(Error::NonConvergence {
            routine: "oracle_overlap",
            estimate: est.value,
            error: est.error,
            target: tol,
        });
    }
    Ok(est.value)
}

/// The 4x4 matrix of unnormalised overlaps in [`BitPair::ALL`] order.
///
/// Entries are stored as logarithms so that normalised overlaps survive
/// when the raw values underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramMatrix4 {
    ln: [[f64; 4]; 4],
}

impl GramMatrix4 {
    pub fn entry(&self, i: BitPair, j: BitPair) -> f64 {
        self.ln[i.index()][j.index()].exp()
    }

    pub fn ln_entry(&self, i: BitPair, j: BitPair) -> f64 {
        self.ln[i.index()][j.index()]
    }

    pub fn entries(&self) -> [[f64; 4]; 4] {
        self.ln.map(|row| row.map(f64::exp))
    }

    /// `<psi_i|psi_j> / sqrt(<psi_i|psi_i> <psi_j|psi_j>)`.
    pub fn normalized(&self, i: BitPair, j: BitPair) -> f64 {
        let (i, j) = (i.index(), j.index());
        (self.ln[i][j] - 0.5 * (self.ln[i][i] + self.ln[j][j])).exp()
    }

    pub fn normalized_entries(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for i in BitPair::ALL {
            for j in BitPair::ALL {
                out[i.index()][j.index()] = self.normalized(i, j);
            }
        }
        out
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        symmetric_eigenvalues(&self.entries())
    }
}

/// Builds the Gram matrix of Eve's four conditional states.
pub fn gram_matrix(ch: &Channel, pt: &AnnouncedPair) -> Result<GramMatrix4> {
    Ok(ClonerModel::new(*ch)?.gram(pt))
}

/// `m_B^c = S sqrt((1 + xi - eta) / ((1 + xi)^2 - 1))`, the announced
/// magnitude at which attacking Alice and attacking Bob are equivalent.
/// `None` for `xi = 0`, where the line recedes to infinity.
pub fn critical_line(ch: &Channel, abs_s: f64) -> Option<f64> {
    let xi = ch.xi();
    if xi <= 0.0 {
        return None;
    }
    let ratio = (1.0 + xi - ch.eta()) / (xi * (2.0 + xi));
    Some(ratio.sqrt() * abs_s)
}

/// Normalised overlaps among Eve's states at one point, together with the
/// sign-error probability that weights them.
///
/// `f1` pairs the matching-bit states `(0,0)` and `(1,1)`, `f2` the
/// mismatching `(0,1)` and `(1,0)`. `g_alice` pairs states that differ only
/// in Alice's bit, `g_bob` states that differ only in Bob's bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateOverlaps {
    pub ln_pe: f64,
    pub pe: f64,
    pub f1: f64,
    pub f2: f64,
    pub g_alice: f64,
    pub g_bob: f64,
    pub ln_f1: f64,
    pub ln_f2: f64,
    pub ln_g_alice: f64,
    pub ln_g_bob: f64,
}

/// Below this log-deficit, differences of deficits are no longer
/// representable and the leading-order log forms take over.
const LN_TAIL: f64 = -575.0;

/// `(1 - sqrt(1 - f^2)) / 2` without cancellation.
fn levitin_error(f: f64) -> f64 {
    let f2 = (f * f).min(1.0);
    f2 / (2.0 * (1.0 + (1.0 - f2).sqrt()))
}

fn ln_levitin_error(ln_f: f64) -> f64 {
    let f = ln_f.exp().min(1.0);
    2.0 * ln_f - (2.0 * (1.0 + (1.0 - f * f).sqrt())).ln()
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// `t * H2(lambda_min / t)` for the 2x2 PSD block `[[a, c], [c, d]]` with
/// trace `t`, given its determinant computed without cancellation.
fn block_entropy(a: f64, d: f64, c: f64, det: f64) -> Result<f64> {
    let t = a + d;
    if t <= 0.0 {
        return Ok(0.0);
    }
    // The determinant carries rounding of order eps * a * d.
    if det < -1e-9 * (t * t).min(a * d + c * c) {
        return Err(Error::Numerical(format!(
            "negative eigenvalue {det:e} in a density block"
        )));
    }
    let big = 0.5 * t + (0.25 * (a - d) * (a - d) + c * c).sqrt();
    let small = det.max(0.0) / big;
    Ok(t * binary_entropy(small / t))
}

impl StateOverlaps {
    /// `H2(P_e)`: Alice and Bob's shortfall from one full bit.
    pub fn ab_deficit(&self) -> f64 {
        binary_entropy(self.pe)
    }

    fn ln_ab_deficit(&self) -> f64 {
        ln_binary_entropy(self.ln_pe)
    }

    /// `1 - I_E` under the individual-attack (Levitin) bound. The side
    /// information about whether the bits match leaves Eve with the pair
    /// `(0,0)/(1,1)` with probability `1 - P_e` and `(0,1)/(1,0)` otherwise;
    /// either pair reveals both parties' bits at once, so the bound is the
    /// same for both targets.
    pub fn levitin_deficit(&self) -> f64 {
        (1.0 - self.pe) * binary_entropy(levitin_error(self.f1))
            + self.pe * binary_entropy(levitin_error(self.f2))
    }

    fn ln_levitin_deficit(&self) -> f64 {
        ln_add_exp(
            (-self.pe).ln_1p() + ln_binary_entropy(ln_levitin_error(self.ln_f1)),
            self.ln_pe + ln_binary_entropy(ln_levitin_error(self.ln_f2)),
        )
    }

    /// `1 - chi` for the collective-attack (Holevo) bound.
    ///
    /// Each target ensemble `rho^k` holds the matching state with weight
    /// `1 - P_e` and the mismatching one with weight `P_e`, and the targets
    /// are equiprobable. The average state is the same for both targets; it
    /// commutes with the global bit flip, so its spectrum splits into an even
    /// and an odd 2x2 block.
    pub fn holevo_deficit(&self, target: Target) -> Result<f64> {
        let p = self.pe;
        let q = 1.0 - p;
        let (f1, f2, ga, gb) = (self.f1, self.f2, self.g_alice, self.g_bob);
        let cross = (p * q).sqrt();
        let even = block_entropy(
            0.5 * q * (1.0 + f1),
            0.5 * p * (1.0 + f2),
            0.5 * cross * (ga + gb),
            0.25 * p * q * ((1.0 + f1) * (1.0 + f2) - (ga + gb) * (ga + gb)),
        )?;
        // The odd block is nearly singular when the overlaps approach one;
        // form its entries from the logs so the determinant keeps precision.
        let u1 = -self.ln_f1.exp_m1();
        let u2 = -self.ln_f2.exp_m1();
        let dg = if self.ln_g_bob >= self.ln_g_alice {
            -gb * (self.ln_g_alice - self.ln_g_bob).exp_m1()
        } else {
            ga * (self.ln_g_bob - self.ln_g_alice).exp_m1()
        };
        let odd = block_entropy(
            0.5 * q * u1,
            0.5 * p * u2,
            0.5 * cross * dg,
            0.25 * p * q * (u1 * u2 - dg * dg),
        )?;
        // Entropy of each target ensemble: two states of overlap g.
        let g = match target {
            Target::Alice => gb,
            Target::Bob => ga,
        };
        let det = p * q * (1.0 - g * g).max(0.0);
        let sub = binary_entropy(2.0 * det / (1.0 + (1.0 - 4.0 * det).max(0.0).sqrt()));
        let eps = (q * f1 + p * f2).clamp(0.0, 1.0);
        let deficit = phi_unchecked(eps) - even - odd + sub;
        if !(-1e-9..=1.0 + 1e-9).contains(&deficit) {
            return Err(Error::Numerical(format!(
                "Holevo deficit {deficit} outside [0, 1]"
            )));
        }
        Ok(deficit.clamp(0.0, 1.0))
    }

    fn ln_holevo_deficit(&self, target: Target) -> f64 {
        let ln_eps = ln_add_exp((-self.pe).ln_1p() + self.ln_f1, self.ln_pe + self.ln_f2);
        let ln_phi = 2.0 * ln_eps - (2.0 * LN_2).ln();
        let ln_other = match target {
            Target::Alice => self.ln_g_alice,
            Target::Bob => self.ln_g_bob,
        };
        ln_add_exp(ln_phi, self.ln_ab_deficit() + 2.0 * ln_other)
    }

    /// Target that maximises Eve's information for the given attack.
    /// Collective: Bob when `g_alice > g_bob` (above the critical line).
    /// Individual: the bound is target-independent; the label follows the
    /// same rule.
    pub fn preferred_target(&self, xi: f64) -> Target {
        if xi > 0.0 && self.ln_g_alice > self.ln_g_bob {
            Target::Bob
        } else {
            Target::Alice
        }
    }

    /// Eve's deficit for the attack, maximised over targets, with the
    /// target that attains it.
    pub fn eve_deficit(&self, attack: Attack, xi: f64) -> Result<(f64, Target)> {
        let target = self.preferred_target(xi);
        let deficit = match attack {
            Attack::Individual => self.levitin_deficit(),
            Attack::Collective => self.holevo_deficit(target)?,
        };
        Ok((deficit, target))
    }

    /// `I_AB - I_E`, evaluated as the difference of the two deficits.
    /// Deep in the tails both deficits are compared through their leading
    /// logarithmic forms so that underflow cannot flip the sign.
    pub fn advantage(&self, attack: Attack, xi: f64) -> Result<Advantage> {
        let (eve, target) = self.eve_deficit(attack, xi)?;
        let ab = self.ab_deficit();
        let ln_ab = self.ln_ab_deficit();
        let ln_eve = match attack {
            Attack::Individual => self.ln_levitin_deficit(),
            Attack::Collective => self.ln_holevo_deficit(target),
        };
        let (delta, kept) = if ln_ab < LN_TAIL && ln_eve < LN_TAIL {
            (ln_eve.exp() - ln_ab.exp(), ln_eve > ln_ab)
        } else {
            (eve - ab, eve > ab)
        };
        Ok(Advantage {
            i_ab: 1.0 - ab,
            i_e: 1.0 - eve,
            delta,
            kept,
            target,
        })
    }
}

/// Per-point information balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advantage {
    pub i_ab: f64,
    pub i_e: f64,
    pub delta: f64,
    /// `I_AB > I_E`. Decided in log space in the tails, where `delta`
    /// itself may underflow to zero.
    pub kept: bool,
    pub target: Target,
}

/// Individual-attack bound on Eve's information,
/// `p1 phi(sqrt(1 - f1^2)) + p2 phi(sqrt(1 - f2^2))`, in bits.
pub fn levitin_bound(ch: &Channel, pt: &AnnouncedPair, target: Target) -> Result<f64> {
    let _ = target;
    let model = ClonerModel::new(*ch)?;
    Ok(1.0 - model.overlaps(pt).levitin_deficit())
}

/// Collective-attack bound `S(rho) - S(rho^0)/2 - S(rho^1)/2`, in bits.
pub fn holevo_bound(ch: &Channel, pt: &AnnouncedPair, target: Target) -> Result<f64> {
    let model = ClonerModel::new(*ch)?;
    Ok(1.0 - model.overlaps(pt).holevo_deficit(target)?)
}

/// Eve's information maximised over the two targets.
pub fn eve_info(ch: &Channel, pt: &AnnouncedPair, attack: Attack) -> Result<f64> {
    let model = ClonerModel::new(*ch)?;
    let (deficit, _) = model.overlaps(pt).eve_deficit(attack, ch.xi())?;
    Ok(1.0 - deficit)
}

/// Von Neumann entropy (bits) of `sum_i w_i |e_i><e_i|` for unit vectors
/// with Gram matrix `gram`, from the spectrum of `sqrt(w_i w_j) gram_ij`.
pub fn entropy_from_gram(weights: &[f64], gram: &[Vec<f64>]) -> Result<f64> {
    let n = weights.len();
    if gram.len() != n || gram.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("gram matrix must be square and match the weights"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    for (i, row) in gram.iter().enumerate() {
        if (row[i] - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("gram diagonal entry {i} is {}, not 1", row[i])));
        }
    }
    let weighted: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (weights[i] * weights[j]).sqrt() * gram[i][j])
                .collect()
        })
        .collect();
    let mut entropy = 0.0;
    for lambda in symmetric_eigenvalues_dyn(&weighted) {
        if lambda < -1e-9 {
            return Err(Error::Numerical(format!("negative eigenvalue {lambda:e}")));
        }
        let lambda = lambda.clamp(0.0, 1.0);
        if lambda > 1e-15 {
            entropy -= lambda * lambda.log2();
        }
    }
    Ok(entropy)
}

/// `p(m_B | S_A)` at the signed arguments carried by a bit pair; equals the
/// squared norm of the corresponding conditional state.
pub fn state_norm(ch: &Channel, pt: &AnnouncedPair, state: BitPair) -> f64 {
    conditional_density(
        ch,
        state.sign_a() * pt.abs_s(),
        state.sign_b() * pt.abs_m(),
    )
}
