//! Monte Carlo emulation of the protocol: Gaussian encoding of both
//! quadratures, a lossy noisy channel, random homodyne basis choice,
//! channel estimation on a random subset and post-selected key extraction.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, purpose, block)`,
//! with blocks of [`BLOCK`] consecutive symbols, so every output is
//! independent of the worker count.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset;
use crate::error::{Error, Result};
use crate::eve::Attack;
use crate::info_theory::{binary_entropy, AnnouncedPair, Channel, Modulation};
use crate::keyrate::{secure_rate, PointEvaluator, RateConvention};

/// Symbols per RNG block.
pub const BLOCK: usize = 4096;

/// Fraction of sifted symbols set aside for channel estimation.
pub const ESTIMATION_FRACTION: f64 = 0.1;

/// Smallest subset [`estimate_channel`] accepts.
pub const MIN_ESTIMATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy)]
enum Stream {
    EncodeX = 1,
    EncodeP = 2,
    NoiseX = 3,
    NoiseP = 4,
    Basis = 5,
    Subset = 6,
}

fn block_rng(seed: u64, stream: Stream, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) | block);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Alice's encoding for one channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub index: u64,
    pub s_x: f64,
    pub s_p: f64,
    /// RNG block the encoding was drawn from.
    pub seed_tag: u64,
}

/// Homodyne outcomes for both quadratures of one channel use. Bob only
/// ever uses one of them; [`sift`] discards the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub index: u64,
    pub s_x: f64,
    pub s_p: f64,
    pub m_x: f64,
    pub m_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    P,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::P => "P",
        })
    }
}

/// One sifted symbol. Bits are `0` for positive and `1` for negative values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftedRecord {
    pub index: u64,
    pub quadrature: Basis,
    pub s_a: f64,
    pub m_b: f64,
    pub bit_a: u8,
    pub bit_b: u8,
}

impl SiftedRecord {
    /// Builds a record from its values; `None` if either is exactly zero.
    pub fn new(index: u64, quadrature: Basis, s_a: f64, m_b: f64) -> Option<Self> {
        if s_a == 0.0 || m_b == 0.0 {
            return None;
        }
        Some(Self {
            index,
            quadrature,
            s_a,
            m_b,
            bit_a: u8::from(s_a < 0.0),
            bit_b: u8::from(m_b < 0.0),
        })
    }

    pub fn announced(&self) -> AnnouncedPair {
        AnnouncedPair::from_signed(self.s_a, self.m_b).expect("sifted values are finite")
    }
}

/// Rounds to the 12 significant digits stored in dataset files, so that
/// values survive a write/read cycle unchanged.
pub fn quantize(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn block_ranges(n: usize) -> impl IndexedParallelIterator<Item = (u64, std::ops::Range<usize>)> {
    (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(move |b| (b as u64, b * BLOCK..((b + 1) * BLOCK).min(n)))
}

/// Draws `n` encodings with both quadratures `~ N(0, V_A)`.
pub fn generate(modulation: &Modulation, n: usize, seed: u64) -> Result<Vec<RawRecord>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let sd = modulation.v_a().sqrt();
    let blocks: Vec<Vec<RawRecord>> = block_ranges(n)
        .map(|(b, range)| {
            let mut rx = block_rng(seed, Stream::EncodeX, b);
            let mut rp = block_rng(seed, Stream::EncodeP, b);
            range
                .map(|i| RawRecord {
                    index: i as u64,
                    s_x: sd * normal(&mut rx),
                    s_p: sd * normal(&mut rp),
                    seed_tag: b,
                })
                .collect()
        })
        .collect();
    Ok(blocks.concat())
}

/// Applies `m = sqrt(eta) s + n`, `n ~ N(0, 1 + xi)`, independently to each
/// quadrature. Noise is keyed by position in `records`.
pub fn transmit(ch: &Channel, records: &[RawRecord], seed: u64) -> Vec<Measurement> {
    let gain = ch.eta().sqrt();
    let sd = ch.noise_variance().sqrt();
    let blocks: Vec<Vec<Measurement>> = block_ranges(records.len())
        .map(|(b, range)| {
            let mut nx = block_rng(seed, Stream::NoiseX, b);
            let mut np = block_rng(seed, Stream::NoiseP, b);
            records[range]
                .iter()
                .map(|r| Measurement {
                    index: r.index,
                    s_x: r.s_x,
                    s_p: r.s_p,
                    m_x: gain * r.s_x + sd * normal(&mut nx),
                    m_p: gain * r.s_p + sd * normal(&mut np),
                })
                .collect()
        })
        .collect();
    blocks.concat()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftOutcome {
    pub records: Vec<SiftedRecord>,
    /// Symbols dropped because a stored value was exactly zero.
    pub dropped_zero: usize,
}

/// Bob's fair-coin basis choice. Values are quantized to dataset precision.
pub fn sift(pairs: &[Measurement], seed: u64) -> SiftOutcome {
    let blocks: Vec<Vec<Option<SiftedRecord>>> = block_ranges(pairs.len())
        .map(|(b, range)| {
            let mut coin = block_rng(seed, Stream::Basis, b);
            pairs[range]
                .iter()
                .map(|p| {
                    let (basis, s, m) = if coin.random::<bool>() {
                        (Basis::P, p.s_p, p.m_p)
                    } else {
                        (Basis::X, p.s_x, p.m_x)
                    };
                    SiftedRecord::new(p.index, basis, quantize(s), quantize(m))
                })
                .collect()
        })
        .collect();
    let all: Vec<Option<SiftedRecord>> = blocks.concat();
    let records: Vec<SiftedRecord> = all.iter().flatten().copied().collect();
    SiftOutcome {
        dropped_zero: all.len() - records.len(),
        records,
    }
}

/// Channel parameters estimated from `(s, m)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub eta_hat: f64,
    pub sigma_eta: f64,
    pub xi_hat: f64,
    pub sigma_xi: f64,
    pub n_used: usize,
    /// Excess kurtosis of the regression residuals; zero for Gaussian noise.
    pub gaussianity_stat: f64,
    /// Sample second moment of Alice's values.
    pub v_a_hat: f64,
    /// `xi_hat` came out negative and was set to zero.
    pub xi_clamped: bool,
    /// The fitted transmission exceeded one and was set to one.
    pub eta_clamped: bool,
}

impl ChannelEstimate {
    /// The estimated channel. A transmission of one with nonzero noise is
    /// outside the attack model, so it is pulled just below one.
    pub fn channel(&self) -> Result<Channel> {
        let eta = if self.xi_hat > 0.0 {
            self.eta_hat.min(1.0 - 1e-9)
        } else {
            self.eta_hat
        };
        Channel::new(eta, self.xi_hat)
    }
}

/// Least-squares fit of `m = sqrt(eta) s + n` through the origin.
///
/// `eta_hat = slope^2`, `1 + xi_hat` is the residual variance. Standard
/// errors follow the usual regression formulas, with the residual-variance
/// error `sigma^2 sqrt(2 / (n - 1))`.
pub fn estimate_channel(records: &[SiftedRecord]) -> Result<ChannelEstimate> {
    let n = records.len();
    if n < MIN_ESTIMATION_SAMPLES {
        return Err(Error::invalid(format!(
            "channel estimation needs at least {MIN_ESTIMATION_SAMPLES} samples, got {n}"
        )));
    }
    let (ss, sm) = records
        .iter()
        .fold((0.0, 0.0), |(ss, sm), r| (ss + r.s_a * r.s_a, sm + r.s_a * r.m_b));
    if ss <= 0.0 {
        return Err(Error::invalid("all encodings are zero"));
    }
    let slope = sm / ss;
    let nf = n as f64;
    let (r2, r4) = records.iter().fold((0.0, 0.0), |(r2, r4), r| {
        let e = r.m_b - slope * r.s_a;
        (r2 + e * e, r4 + e * e * e * e)
    });
    let var = r2 / (nf - 1.0);
    let m2 = r2 / nf;
    let kurtosis = (r4 / nf) / (m2 * m2) - 3.0;
    let sigma_slope = (var / ss).sqrt();

    let mut eta_hat = slope * slope;
    let eta_clamped = eta_hat > 1.0;
    if eta_clamped {
        log::warn!("estimated transmission {eta_hat} exceeds one; clamped");
        eta_hat = 1.0;
    }
    if slope <= 0.0 {
        return Err(Error::ModelDomain(format!(
            "fitted channel gain {slope} is not positive"
        )));
    }
    let mut xi_hat = var - 1.0;
    let xi_clamped = xi_hat < 0.0;
    if xi_clamped {
        log::warn!("estimated excess noise {xi_hat} is negative; clamped to zero");
        xi_hat = 0.0;
    }
    Ok(ChannelEstimate {
        eta_hat,
        sigma_eta: 2.0 * slope.abs() * sigma_slope,
        xi_hat,
        sigma_xi: var * (2.0 / (nf - 1.0)).sqrt(),
        n_used: n,
        gaussianity_stat: kurtosis,
        v_a_hat: ss / nf,
        xi_clamped,
        eta_clamped,
    })
}

/// Post-selected information per sifted symbol, averaged over records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRate {
    pub delta_i_exp: f64,
    pub std_error: f64,
    pub n_kept: usize,
    pub n_total: usize,
    /// Diagnostic: kept fraction times `1 - H2(e) - <I_E>`, with `e` the
    /// pooled bit-error rate of the kept records.
    pub delta_i_aggregate: f64,
    pub aggregate_error_rate: f64,
}

const REDUCE_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    sum: f64,
    sum_sq: f64,
    kept: usize,
    errors: usize,
    i_e_kept: f64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            kept: self.kept + o.kept,
            errors: self.errors + o.errors,
            i_e_kept: self.i_e_kept + o.i_e_kept,
        }
    }
}

/// Mean of `delta_i 1{kept}` over the records, evaluated pointwise at each
/// record's announced magnitudes under `ch`.
pub fn empirical_rate(records: &[SiftedRecord], ch: &Channel, attack: Attack) -> Result<EmpiricalRate> {
    let eval = PointEvaluator::new(ch, attack)?;
    let tallies: Vec<Tally> = records
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut t = Tally::default();
            for r in chunk {
                let b = eval.breakdown(&r.announced())?;
                if b.kept {
                    let d = b.delta_i.max(0.0);
                    t.sum += d;
                    t.sum_sq += d * d;
                    t.kept += 1;
                    t.errors += usize::from(r.bit_a != r.bit_b);
                    t.i_e_kept += b.i_e;
                }
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let t = tallies.into_iter().fold(Tally::default(), Tally::merge);
    let n = records.len();
    if n == 0 {
        return Ok(EmpiricalRate {
            delta_i_exp: 0.0,
            std_error: 0.0,
            n_kept: 0,
            n_total: 0,
            delta_i_aggregate: 0.0,
            aggregate_error_rate: 0.0,
        });
    }
    let nf = n as f64;
    let mean = t.sum / nf;
    let var = if n > 1 {
        ((t.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let (agg, err_rate) = if t.kept > 0 {
        let k = t.kept as f64;
        let e = t.errors as f64 / k;
        (k / nf * (1.0 - binary_entropy(e) - t.i_e_kept / k), e)
    } else {
        (0.0, 0.0)
    };
    Ok(EmpiricalRate {
        delta_i_exp: mean,
        std_error: (var / nf).sqrt(),
        n_kept: t.kept,
        n_total: n,
        delta_i_aggregate: agg,
        aggregate_error_rate: err_rate,
    })
}

/// Uncertainty of the rate induced by the channel-estimation errors.
///
/// The rate integral is differentiated numerically at the estimated channel
/// with steps of one standard error; the two contributions are combined in
/// quadrature.
pub fn parameter_error(estimate: &ChannelEstimate, modulation: &Modulation, attack: Attack) -> Result<f64> {
    let ch = estimate.channel()?;
    let rate = |eta: f64, xi: f64| -> Result<f64> {
        Ok(secure_rate(&Channel::new(eta, xi)?, modulation, attack)?.delta_i_total)
    };
    let slope = |x: f64, h: f64, lo: f64, hi: f64, f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let (a, b) = ((x - h).max(lo), (x + h).min(hi));
        if b <= a {
            return Ok(0.0);
        }
        Ok((f(b)? - f(a)?) / (b - a))
    };
    let (eta, xi) = (ch.eta(), ch.xi());
    let eta_hi = if xi > 0.0 { 1.0 - 1e-9 } else { 1.0 };
    let d_eta = slope(eta, estimate.sigma_eta, 1e-9, eta_hi, &|e| rate(e, xi))?;
    let d_xi = slope(xi, estimate.sigma_xi, 0.0, f64::INFINITY, &|x| rate(eta, x))?;
    Ok((d_eta * estimate.sigma_eta).hypot(d_xi * estimate.sigma_xi))
}

/// Splits sifted records into a random estimation subset (drawn without
/// replacement) and the remaining key records, both in index order.
pub fn split_estimation(records: &[SiftedRecord], seed: u64) -> (Vec<SiftedRecord>, Vec<SiftedRecord>) {
    let n = records.len();
    let k = ((n as f64) * ESTIMATION_FRACTION).round() as usize;
    let mut rng = block_rng(seed, Stream::Subset, 0);
    let mut chosen = vec![false; n];
    for i in index::sample(&mut rng, n, k.min(n)) {
        chosen[i] = true;
    }
    let (mut est, mut key) = (Vec::with_capacity(k), Vec::with_capacity(n - k.min(n)));
    for (r, c) in records.iter().zip(chosen) {
        if c {
            est.push(*r);
        } else {
            key.push(*r);
        }
    }
    (est, key)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub eta: f64,
    pub xi: f64,
    pub v_a: f64,
    pub n: usize,
    pub seed: u64,
    pub attack: Attack,
    pub rate_convention: RateConvention,
}

/// Sidecar written next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub eta: f64,
    pub xi: f64,
    pub v_a: f64,
    pub n: usize,
    pub eta_hat: f64,
    pub xi_hat: f64,
    pub delta_i_exp: f64,
    pub std_error: f64,
    pub rate_convention: RateConvention,
    pub attack: Attack,
    pub sigma_eta: f64,
    pub sigma_xi: f64,
    pub gaussianity_stat: f64,
    pub n_estimation: usize,
    pub n_key: usize,
    pub n_kept: usize,
    pub n_dropped: usize,
    pub delta_i_aggregate: f64,
    /// Rate uncertainty propagated from `sigma_eta` and `sigma_xi`.
    pub param_error: f64,
    /// `std_error` and `param_error` combined in quadrature.
    pub total_error: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub estimate: ChannelEstimate,
    pub rate: EmpiricalRate,
    /// See [`parameter_error`].
    pub param_error: f64,
    pub total_error: f64,
    pub n_dropped: usize,
    pub n_estimation: usize,
    pub metadata: Metadata,
    /// Dataset, estimation subset and metadata paths, when written.
    pub files: Option<ExperimentFiles>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentFiles {
    pub dataset: PathBuf,
    pub estimation: PathBuf,
    pub metadata: PathBuf,
}

impl ExperimentFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            dataset: dir.join("dataset.csv"),
            estimation: dir.join("estimation.csv"),
            metadata: dir.join("metadata.json"),
        }
    }
}

/// Full protocol run. The key records are rated with the estimated channel.
/// When `out_dir` is given the key records, the estimation subset and the
/// metadata are written there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    let ch = Channel::new(cfg.eta, cfg.xi)?;
    let modulation = Modulation::new(cfg.v_a)?;
    if cfg.n < MIN_ESTIMATION_SAMPLES * 10 {
        return Err(Error::invalid(format!(
            "n must be at least {} so the estimation subset has {MIN_ESTIMATION_SAMPLES} samples",
            MIN_ESTIMATION_SAMPLES * 10
        )));
    }
    let raw = generate(&modulation, cfg.n, cfg.seed)?;
    let pairs = transmit(&ch, &raw, cfg.seed);
    drop(raw);
    let sifted = sift(&pairs, cfg.seed);
    drop(pairs);
    let (est_set, key) = split_estimation(&sifted.records, cfg.seed);
    let estimate = estimate_channel(&est_set)?;
    let rate = empirical_rate(&key, &estimate.channel()?, cfg.attack)?;
    let param_error = parameter_error(&estimate, &modulation, cfg.attack)?;
    let total_error = rate.std_error.hypot(param_error);
    let factor = cfg.rate_convention.factor();
    let metadata = Metadata {
        seed: cfg.seed,
        eta: cfg.eta,
        xi: cfg.xi,
        v_a: cfg.v_a,
        n: cfg.n,
        eta_hat: estimate.eta_hat,
        xi_hat: estimate.xi_hat,
        delta_i_exp: rate.delta_i_exp * factor,
        std_error: rate.std_error * factor,
        rate_convention: cfg.rate_convention,
        attack: cfg.attack,
        sigma_eta: estimate.sigma_eta,
        sigma_xi: estimate.sigma_xi,
        gaussianity_stat: estimate.gaussianity_stat,
        n_estimation: est_set.len(),
        n_key: key.len(),
        n_kept: rate.n_kept,
        n_dropped: sifted.dropped_zero,
        delta_i_aggregate: rate.delta_i_aggregate * factor,
        param_error: param_error * factor,
        total_error: total_error * factor,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let files = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let files = ExperimentFiles::in_dir(dir);
            dataset::write_dataset(&files.dataset, &key)?;
            dataset::write_dataset(&files.estimation, &est_set)?;
            dataset::write_metadata(&files.metadata, &metadata)?;
            Some(files)
        }
        None => None,
    };
    Ok(ExperimentResult {
        config: *cfg,
        estimate,
        rate,
        param_error,
        total_error,
        n_dropped: sifted.dropped_zero,
        n_estimation: est_set.len(),
        metadata,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_is_idempotent() {
        for x in [1.0 / 3.0, -2.718281828459045e-7, 123456.789012345] {
            let q = quantize(x);
            assert_eq!(quantize(q), q);
            assert!((q - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn bits_follow_signs() {
        let r = SiftedRecord::new(0, Basis::X, -0.3, 2.0).unwrap();
        assert_eq!((r.bit_a, r.bit_b), (1, 0));
        assert!(SiftedRecord::new(0, Basis::P, 0.0, 1.0).is_none());
    }

    #[test]
    fn generation_is_deterministic_and_block_keyed() {
        let m = Modulation::new(2.0).unwrap();
        let a = generate(&m, BLOCK + 17, 9).unwrap();
        let b = generate(&m, BLOCK + 17, 9).unwrap();
        assert_eq!(a, b);
        let short = generate(&m, 10, 9).unwrap();
        assert_eq!(&a[..10], &short[..]);
        assert_ne!(generate(&m, 10, 10).unwrap(), short);
        assert!(generate(&m, 0, 1).is_err());
    }

    #[test]
    fn sift_keeps_length() {
        let ch = Channel::new(0.5, 0.2).unwrap();
        let m = Modulation::new(3.0).unwrap();
        let raw = generate(&m, 5000, 3).unwrap();
        let s = sift(&transmit(&ch, &raw, 3), 3);
        assert_eq!(s.records.len() + s.dropped_zero, 5000);
    }

    #[test]
    fn split_is_disjoint() {
        let recs: Vec<SiftedRecord> = (0..1000)
            .map(|i| SiftedRecord::new(i, Basis::X, 1.0 + i as f64, 1.0).unwrap())
            .collect();
        let (e, k) = split_estimation(&recs, 4);
        assert_eq!(e.len(), 100);
        assert_eq!(k.len(), 900);
        let mut idx: Vec<u64> = e.iter().chain(&k).map(|r| r.index).collect();
        idx.sort_unstable();
        assert_eq!(idx, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn estimation_rejects_small_subsets() {
        let recs: Vec<SiftedRecord> = (0..50)
            .map(|i| SiftedRecord::new(i, Basis::X, 1.0, 1.0).unwrap())
            .collect();
        assert!(estimate_channel(&recs).is_err());
    }

    #[test]
    fn zero_encodings_give_zero_rate() {
        let ch = Channel::new(0.5, 0.1).unwrap();
        let recs: Vec<SiftedRecord> = (0..10)
            .map(|i| SiftedRecord {
                index: i,
                quadrature: Basis::X,
                s_a: 0.0,
                m_b: 1.0,
                bit_a: 0,
                bit_b: 0,
            })
            .collect();
        let r = empirical_rate(&recs, &ch, Attack::Individual).unwrap();
        assert_eq!(r.delta_i_exp, 0.0);
        assert_eq!(r.n_kept, 0);
    }
}
