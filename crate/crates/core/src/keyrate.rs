//! Post-selection regions and the secret-key rate they support.
//!
//! A symbol is kept when Alice and Bob's information at the announced
//! magnitudes exceeds Eve's bound. The rate is the joint-density-weighted
//! integral of that advantage over the kept region, optimised over Alice's
//! modulation variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::eve::{Attack, ClonerModel, Target};
use crate::info_theory::{conditional_density, gaussian_pdf, AnnouncedPair, Channel, Modulation};
use crate::numerics::{bisect, golden_max, Quadrature};

/// Information balance at one announced point, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub i_ab: f64,
    pub i_e: f64,
    /// `i_ab - i_e`, evaluated from the deficits `1 - i_ab` and `1 - i_e`
    /// so that it stays accurate when both informations approach one bit.
    pub delta_i: f64,
    /// `i_ab > i_e`, which stays decidable after `delta_i` underflows.
    pub kept: bool,
    pub attack: Attack,
    pub target_used: Target,
}

/// Unit in which rates are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    /// Bits per sifted quadrature symbol.
    #[default]
    Sifted,
    /// Bits per channel use. Alice encodes both quadratures and Bob measures
    /// one, so every channel use yields exactly one sifted symbol.
    ChannelUse,
}

impl RateConvention {
    /// Sifted symbols per unit of this convention.
    pub fn factor(self) -> f64 {
        match self {
            RateConvention::Sifted => 1.0,
            RateConvention::ChannelUse => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RateConvention::Sifted => "bits per sifted symbol",
            RateConvention::ChannelUse => "bits per channel use (one sifted symbol per use)",
        }
    }
}

impl fmt::Display for RateConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateConvention::Sifted => "sifted",
            RateConvention::ChannelUse => "channel-use",
        })
    }
}

/// Per-point evaluator with the channel-dependent work done once.
#[derive(Debug, Clone, Copy)]
pub struct PointEvaluator {
    model: ClonerModel,
    attack: Attack,
}

impl PointEvaluator {
    pub fn new(ch: &Channel, attack: Attack) -> Result<Self> {
        Ok(Self {
            model: ClonerModel::new(*ch)?,
            attack,
        })
    }

    pub fn channel(&self) -> Channel {
        self.model.channel()
    }

    pub fn attack(&self) -> Attack {
        self.attack
    }

    pub fn breakdown(&self, pt: &AnnouncedPair) -> Result<RateBreakdown> {
        let adv = self
            .model
            .overlaps(pt)
            .advantage(self.attack, self.model.channel().xi())?;
        Ok(RateBreakdown {
            i_ab: adv.i_ab,
            i_e: adv.i_e,
            delta_i: adv.delta,
            kept: adv.kept,
            attack: self.attack,
            target_used: adv.target,
        })
    }

    /// `delta_i` at raw magnitudes; no validation beyond finiteness.
    pub fn delta(&self, abs_s: f64, abs_m: f64) -> Result<f64> {
        let pt = AnnouncedPair::new(abs_s, abs_m)?;
        Ok(self.breakdown(&pt)?.delta_i)
    }

    pub fn keep(&self, abs_s: f64, abs_m: f64) -> Result<bool> {
        let pt = AnnouncedPair::new(abs_s, abs_m)?;
        Ok(self.breakdown(&pt)?.kept)
    }
}

pub fn delta_i_point(ch: &Channel, pt: &AnnouncedPair, attack: Attack) -> Result<RateBreakdown> {
    PointEvaluator::new(ch, attack)?.breakdown(pt)
}

/// True iff Alice and Bob's information strictly exceeds Eve's.
pub fn postselect_keep(ch: &Channel, pt: &AnnouncedPair, attack: Attack) -> Result<bool> {
    Ok(delta_i_point(ch, pt, attack)?.kept)
}

/// Dense evaluation of the advantage on a `(|S_A|, |m_B|)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub channel: Channel,
    pub attack: Attack,
    pub s_grid: Vec<f64>,
    pub m_grid: Vec<f64>,
    /// `values[i][j]` is `delta_i` at `(s_grid[i], m_grid[j])`.
    pub values: Vec<Vec<f64>>,
    pub kept: Vec<Vec<bool>>,
    pub targets: Vec<Vec<Target>>,
}

impl RegionMap {
    pub fn kept_count(&self) -> usize {
        self.kept.iter().flatten().filter(|&&k| k).count()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_count() == 0
    }

    /// Whether every kept cell of `self` is also kept in `other`.
    /// Grids must match.
    pub fn is_subset_of(&self, other: &RegionMap) -> bool {
        self.s_grid == other.s_grid
            && self.m_grid == other.m_grid
            && self
                .kept
                .iter()
                .flatten()
                .zip(other.kept.iter().flatten())
                .all(|(&a, &b)| !a || b)
    }
}

fn uniform_grid(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
}

/// Evaluates `delta_i` on an `n_s x n_m` uniform grid spanning
/// `[0, s_max] x [0, m_max]`, one row per worker.
pub fn region_map(
    ch: &Channel,
    attack: Attack,
    s_max: f64,
    m_max: f64,
    n_s: usize,
    n_m: usize,
) -> Result<RegionMap> {
    if !(s_max > 0.0 && m_max > 0.0 && s_max.is_finite() && m_max.is_finite()) {
        return Err(Error::invalid("grid extents must be finite and positive"));
    }
    if n_s < 2 || n_m < 2 {
        return Err(Error::invalid("grids need at least two points per axis"));
    }
    let eval = PointEvaluator::new(ch, attack)?;
    let s_grid = uniform_grid(s_max, n_s);
    let m_grid = uniform_grid(m_max, n_m);
    let rows: Vec<Vec<RateBreakdown>> = s_grid
        .par_iter()
        .map(|&s| {
            m_grid
                .iter()
                .map(|&m| eval.breakdown(&AnnouncedPair::new(s, m)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionMap {
        channel: *ch,
        attack,
        values: rows.iter().map(|r| r.iter().map(|b| b.delta_i).collect()).collect(),
        kept: rows.iter().map(|r| r.iter().map(|b| b.kept).collect()).collect(),
        targets: rows.iter().map(|r| r.iter().map(|b| b.target_used).collect()).collect(),
        s_grid,
        m_grid,
    })
}

/// Slopes of the two rays `m = k S` that bound the kept region for large
/// `|S_A|`.
///
/// Along a ray both `ln P_e` and `ln f1^2` scale as `S^2`, and the region
/// edge is where the two exponents meet:
/// `xi (2+xi) k^2 - 2 sqrt(eta) (1+xi) k + (1+xi-eta) = 0`, so
///
/// `k = (sqrt(eta) (1+xi) -+ sqrt(eta (1+xi)^2 - xi (xi+2) (xi+1-eta))) / (xi (2+xi))`.
///
/// The discriminant is the threshold polynomial, so the rays merge at
/// `xi_0`. See [`printed_asymptote_slopes`] for the variant with
/// `sqrt(eta (1+xi))` as the centre term.
pub fn asymptote_slopes(ch: &Channel) -> Result<(f64, f64)> {
    slopes_with_centre(ch, |eta, xi| eta.sqrt() * (1.0 + xi))
}

/// The asymptote formula with centre term `sqrt(eta (1+xi))`, as it is
/// commonly printed. These rays share the threshold but are not where the
/// kept region actually flattens out; kept for comparison only.
pub fn printed_asymptote_slopes(ch: &Channel) -> Result<(f64, f64)> {
    slopes_with_centre(ch, |eta, xi| (eta * (1.0 + xi)).sqrt())
}

fn slopes_with_centre(ch: &Channel, centre: impl Fn(f64, f64) -> f64) -> Result<(f64, f64)> {
    let (eta, xi) = (ch.eta(), ch.xi());
    if xi <= 0.0 {
        return Err(Error::invalid(
            "asymptote slopes need xi > 0 (the upper ray is at infinity for xi = 0)",
        ));
    }
    let disc = threshold_polynomial(eta, xi);
    if disc < 0.0 {
        return Err(Error::NoSecureAsymptotes { eta, xi });
    }
    let c = centre(eta, xi);
    let spread = disc.sqrt();
    let denom = xi * (2.0 + xi);
    Ok(((c - spread) / denom, (c + spread) / denom))
}

/// `eta (1+xi)^2 - xi (xi+2) (xi+1-eta)`; positive below the noise threshold.
pub fn threshold_polynomial(eta: f64, xi: f64) -> f64 {
    eta * (1.0 + xi) * (1.0 + xi) - xi * (xi + 2.0) * (xi + 1.0 - eta)
}

/// Excess noise `xi_0` at which the two asymptotic rays merge and the kept
/// region disappears: the root of `eta (1+xi)^2 = xi (xi+2) (xi+1-eta)` in
/// `(0, 2 eta)`.
pub fn noise_threshold(eta: f64) -> Result<f64> {
    if !eta.is_finite() || !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
    }
    bisect(
        |xi| threshold_polynomial(eta, xi),
        0.0,
        2.0 * eta,
        1e-13 * eta,
        200,
    )
}

/// Noise level `2 eta` beyond which Alice and Bob's state is separable.
pub fn separability_bound(eta: f64) -> f64 {
    2.0 * eta
}

/// Outcome of the rate integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecureRateResult {
    /// Bits per sifted symbol.
    pub delta_i_total: f64,
    pub v_a_used: f64,
    pub attack: Attack,
    pub integration_estimate_error: f64,
}

/// Accuracy controls for [`secure_rate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Integration box half-widths in standard deviations of `S_A` and `m_B`.
    pub extent_sigmas: f64,
    /// Coarse samples per `|m_B|` slice used to locate the region boundary.
    pub scan_points: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-7,
            extent_sigmas: 8.0,
            scan_points: 96,
        }
    }
}

impl RateOptions {
    /// Tighter tolerances and a denser boundary scan, for convergence checks.
    pub fn refined(self) -> Self {
        Self {
            abs_tol: self.abs_tol * 1e-2,
            rel_tol: self.rel_tol * 1e-2,
            extent_sigmas: self.extent_sigmas,
            scan_points: self.scan_points * 2,
        }
    }
}

/// Sub-intervals of `[0, m_max]` that are kept at fixed `|S_A|`.
///
/// Sign changes are bracketed on a uniform scan of `scan` points and then
/// bisected to `1e-12 m_max`; kept stretches narrower than the scan spacing
/// can be missed.
pub fn kept_intervals(
    eval: &PointEvaluator,
    abs_s: f64,
    m_max: f64,
    scan: usize,
) -> Result<Vec<(f64, f64)>> {
    let scan = scan.max(2);
    let step = m_max / (scan - 1) as f64;
    let kept_at = |m: f64| eval.keep(abs_s, m);
    let refine = |lo: f64, hi: f64, lo_kept: bool| -> Result<f64> {
        let sign = |m: f64| match kept_at(m) {
            Ok(k) if k == lo_kept => -1.0,
            Ok(_) => 1.0,
            Err(_) => f64::NAN,
        };
        bisect(sign, lo, hi, 1e-12 * m_max.max(1.0), 200)
    };
    let mut out = Vec::new();
    let mut prev_m = 0.0;
    let mut prev = kept_at(0.0)?;
    let mut open = if prev { Some(0.0) } else { None };
    for k in 1..scan {
        let m = if k + 1 == scan { m_max } else { step * k as f64 };
        let now = kept_at(m)?;
        if now != prev {
            let edge = refine(prev_m, m, prev)?;
            if now {
                open = Some(edge);
            } else if let Some(start) = open.take() {
                out.push((start, edge));
            }
        }
        prev = now;
        prev_m = m;
    }
    if let Some(start) = open {
        out.push((start, m_max));
    }
    Ok(out)
}

/// Post-selected key rate with default accuracy.
pub fn secure_rate(ch: &Channel, modulation: &Modulation, attack: Attack) -> Result<SecureRateResult> {
    secure_rate_with(ch, modulation, attack, &RateOptions::default())
}

/// Integrates `p(S_A, m_B) (I_AB - I_E)` over the kept region.
///
/// The four sign combinations of `(S_A, m_B)` announce the same magnitudes,
/// so the integral runs over the positive quadrant with the folded weight
/// `2 p(s) [p(m | s) + p(m | -s)]`. The outer integral is adaptive in
/// `|S_A|`; each inner slice is split at the region boundary so that the
/// Gauss-Kronrod panels only ever see a smooth integrand.
pub fn secure_rate_with(
    ch: &Channel,
    modulation: &Modulation,
    attack: Attack,
    opts: &RateOptions,
) -> Result<SecureRateResult> {
    let eval = PointEvaluator::new(ch, attack)?;
    let v_a = modulation.v_a();
    let s_max = opts.extent_sigmas * v_a.sqrt();
    let m_max = opts.extent_sigmas * modulation.bob_variance(ch).sqrt();
    let inner = Quadrature::new(0.25 * opts.abs_tol / s_max, 0.25 * opts.rel_tol);
    let outer = Quadrature::new(0.5 * opts.abs_tol, 0.5 * opts.rel_tol).with_max_intervals(500);

    let mut failure: Option<Error> = None;
    let mut inner_error = 0.0_f64;
    let mut inner_ok = true;
    let est = outer.integrate(
        |s| {
            if failure.is_some() {
                return 0.0;
            }
            let intervals = match kept_intervals(&eval, s, m_max, opts.scan_points) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return 0.0;
                }
            };
            let prior = 2.0 * gaussian_pdf(s, 0.0, v_a);
            let mut total = 0.0;
            for (lo, hi) in intervals {
                let e = inner.integrate(
                    |m| {
                        let weight = prior * (conditional_density(ch, s, m) + conditional_density(ch, -s, m));
                        if weight == 0.0 {
                            return 0.0;
                        }
                        match eval.delta(s, m) {
                            Ok(d) => weight * d.max(0.0),
                            Err(err) => {
                                failure.get_or_insert(err);
                                0.0
                            }
                        }
                    },
                    lo,
                    hi,
                );
                inner_error = inner_error.max(e.error);
                inner_ok &= e.converged;
                total += e.value;
            }
            total
        },
        0.0,
        s_max,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let error = est.error + inner_error * s_max;
    let value = est.value.max(0.0);
    let target = opts.abs_tol.max(opts.rel_tol * value);
    if !(est.converged && inner_ok) && error > 10.0 * target {
        return Err(Error::NonConvergence {
            routine: "secure_rate",
            estimate: value,
            error,
            target,
        });
    }
    Ok(SecureRateResult {
        delta_i_total: value,
        v_a_used: v_a,
        attack,
        integration_estimate_error: error,
    })
}

/// Result of maximising the rate over Alice's modulation variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedModulation {
    pub v_a_opt: f64,
    pub rate: SecureRateResult,
    /// The maximiser sits at an end of the search interval `[0.1, 100]`.
    pub pinned_to_boundary: bool,
}

pub const VA_SEARCH_RANGE: (f64, f64) = (0.1, 100.0);

/// Golden-section search on `ln V_A` over [`VA_SEARCH_RANGE`] to a relative
/// tolerance of `1e-3` in `V_A`.
pub fn optimize_modulation(ch: &Channel, attack: Attack) -> Result<OptimizedModulation> {
    optimize_modulation_with(ch, attack, &RateOptions::default())
}

pub fn optimize_modulation_with(
    ch: &Channel,
    attack: Attack,
    opts: &RateOptions,
) -> Result<OptimizedModulation> {
    let xi0 = noise_threshold(ch.eta())?;
    if ch.xi() >= xi0 {
        return Err(Error::ModelDomain(format!(
            "xi = {} is at or above the noise threshold {xi0:.6}; no secure region",
            ch.xi()
        )));
    }
    let mut failure: Option<Error> = None;
    let objective = |ln_va: f64| -> f64 {
        if failure.is_some() {
            return f64::NEG_INFINITY;
        }
        let m = Modulation::new(ln_va.exp()).expect("exp of a finite log is positive");
        match secure_rate_with(ch, &m, attack, opts) {
            Ok(r) => r.delta_i_total,
            Err(e) => {
                failure = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    let best = golden_max(
        objective,
        VA_SEARCH_RANGE.0.ln(),
        VA_SEARCH_RANGE.1.ln(),
        1e-3,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let v_a_opt = best.x.exp();
    let rate = secure_rate_with(ch, &Modulation::new(v_a_opt)?, attack, opts)?;
    if best.at_boundary {
        log::warn!(
            "optimal V_A pinned to the search edge at {v_a_opt:.4} (eta={}, xi={}, {attack})",
            ch.eta(),
            ch.xi()
        );
    }
    Ok(OptimizedModulation {
        v_a_opt,
        rate,
        pinned_to_boundary: best.at_boundary,
    })
}

/// How the modulation variance is chosen at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VaChoice {
    /// Re-optimise for the attack being evaluated.
    Optimize,
    /// Use the variance that maximises the individual-attack rate, whatever
    /// attack is being evaluated.
    IndividualOptimum,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub xi: f64,
    /// `None` when no rate was integrated (insecure point).
    pub v_a: Option<f64>,
    pub delta_i: f64,
    pub integration_error: f64,
    /// `xi >= xi_0(eta)`.
    pub insecure: bool,
}

fn rate_at(ch: &Channel, attack: Attack, va: VaChoice, opts: &RateOptions) -> Result<(f64, SecureRateResult)> {
    match va {
        VaChoice::Optimize => {
            let o = optimize_modulation_with(ch, attack, opts)?;
            Ok((o.v_a_opt, o.rate))
        }
        VaChoice::IndividualOptimum => {
            let o = optimize_modulation_with(ch, Attack::Individual, opts)?;
            if attack == Attack::Individual {
                Ok((o.v_a_opt, o.rate))
            } else {
                let r = secure_rate_with(ch, &Modulation::new(o.v_a_opt)?, attack, opts)?;
                Ok((o.v_a_opt, r))
            }
        }
        VaChoice::Fixed(v) => {
            let r = secure_rate_with(ch, &Modulation::new(v)?, attack, opts)?;
            Ok((v, r))
        }
    }
}

/// Rate as a function of excess noise at fixed transmission.
pub fn sweep_noise(eta: f64, xi_list: &[f64], attack: Attack, va: VaChoice) -> Result<Vec<SweepPoint>> {
    sweep_noise_with(eta, xi_list, attack, va, &RateOptions::default())
}

pub fn sweep_noise_with(
    eta: f64,
    xi_list: &[f64],
    attack: Attack,
    va: VaChoice,
    opts: &RateOptions,
) -> Result<Vec<SweepPoint>> {
    let xi0 = noise_threshold(eta)?;
    xi_list
        .par_iter()
        .map(|&xi| {
            let ch = Channel::new(eta, xi)?;
            if xi >= xi0 {
                return Ok(SweepPoint {
                    xi,
                    v_a: None,
                    delta_i: 0.0,
                    integration_error: 0.0,
                    insecure: true,
                });
            }
            let (v_a, r) = rate_at(&ch, attack, va, opts)?;
            Ok(SweepPoint {
                xi,
                v_a: Some(v_a),
                delta_i: r.delta_i_total,
                integration_error: r.integration_estimate_error,
                insecure: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourCell {
    pub eta: f64,
    pub xi: f64,
    pub delta_i: f64,
    pub v_a: Option<f64>,
    /// `xi >= xi_0(eta)`: no post-selection region.
    pub insecure: bool,
    /// `xi >= 2 eta`: Alice and Bob's state is separable.
    pub separable: bool,
}

/// Optimised rate on an `(eta, xi)` grid, row-major in `eta`.
pub fn contour_grid(eta_grid: &[f64], xi_grid: &[f64], attack: Attack) -> Result<Vec<ContourCell>> {
    contour_grid_with(eta_grid, xi_grid, attack, &RateOptions::default())
}

pub fn contour_grid_with(
    eta_grid: &[f64],
    xi_grid: &[f64],
    attack: Attack,
    opts: &RateOptions,
) -> Result<Vec<ContourCell>> {
    let cells: Vec<(f64, f64)> = eta_grid
        .iter()
        .flat_map(|&eta| xi_grid.iter().map(move |&xi| (eta, xi)))
        .collect();
    cells
        .par_iter()
        .map(|&(eta, xi)| {
            let ch = Channel::new(eta, xi)?;
            let xi0 = noise_threshold(eta)?;
            let separable = xi >= separability_bound(eta);
            if xi >= xi0 {
                return Ok(ContourCell {
                    eta,
                    xi,
                    delta_i: 0.0,
                    v_a: None,
                    insecure: true,
                    separable,
                });
            }
            let o = optimize_modulation_with(&ch, attack, opts)?;
            Ok(ContourCell {
                eta,
                xi,
                delta_i: o.rate.delta_i_total,
                v_a: Some(o.v_a_opt),
                insecure: false,
                separable,
            })
        })
        .collect()
}

/// Log-spaced contour levels `1e-1 .. 1e-4` and `1e-7`.
pub const CONTOUR_LEVELS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-7];

/// Highest contour level not exceeding `delta_i`, or `None` below all levels.
pub fn contour_band(delta_i: f64) -> Option<f64> {
    CONTOUR_LEVELS.iter().copied().find(|&l| delta_i >= l)
}
