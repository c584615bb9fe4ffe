use psqkd_core::dataset::{read_dataset, read_metadata, write_dataset};
use psqkd_core::simulator::{
    empirical_rate, estimate_channel, generate, run_experiment, sift, transmit, Basis,
    ExperimentConfig,
};
use psqkd_core::{Attack, Channel, Modulation, RateConvention, SiftedRecord};

fn ch(eta: f64, xi: f64) -> Channel {
    Channel::new(eta, xi).unwrap()
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn encodings_have_requested_moments() {
    let n = 1_000_000;
    let raw = generate(&Modulation::new(3.0).unwrap(), n, 5).unwrap();
    assert_eq!(raw.len(), n);
    for q in [0, 1] {
        let xs = raw.iter().map(|r| if q == 0 { r.s_x } else { r.s_p });
        let (mean, var) = mean_var(xs);
        assert!(mean.abs() < 4.0 * (3.0 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 3.0).abs() < 4.0 * 3.0 * (2.0 / n as f64).sqrt(), "var {var}");
    }
    assert_eq!(raw, generate(&Modulation::new(3.0).unwrap(), n, 5).unwrap());
}

#[test]
fn channel_moments() {
    let n = 1_000_000;
    let nf = n as f64;
    let m = Modulation::new(3.0).unwrap();
    let raw = generate(&m, n, 8).unwrap();

    let pure = transmit(&ch(1.0, 0.0), &raw, 8);
    let (_, v) = mean_var(pure.iter().map(|p| p.m_x - p.s_x));
    assert!((v - 1.0).abs() < 4.0 * (2.0 / nf).sqrt(), "vacuum residual {v}");

    let (eta, xi) = (0.5, 0.2);
    let out = transmit(&ch(eta, xi), &raw, 8);
    let vb = eta * 3.0 + 1.0 + xi;
    let (_, v) = mean_var(out.iter().map(|p| p.m_p));
    assert!((v - vb).abs() < 4.0 * vb * (2.0 / nf).sqrt(), "Var(m) {v}");
    let cov = out.iter().map(|p| p.s_x * p.m_x).sum::<f64>() / nf;
    let expect = eta.sqrt() * 3.0;
    let se = ((3.0 * vb + expect * expect) / nf).sqrt();
    assert!((cov - expect).abs() < 4.0 * se, "Cov {cov}");
}

#[test]
fn sifting_is_fair_and_symmetric() {
    let n = 1_000_000;
    let c = ch(0.5, 0.2);
    let raw = generate(&Modulation::new(3.0).unwrap(), n, 21).unwrap();
    let s = sift(&transmit(&c, &raw, 21), 21);
    assert_eq!(s.records.len() + s.dropped_zero, n);
    let nx = s.records.iter().filter(|r| r.quadrature == Basis::X).count() as f64;
    let nf = s.records.len() as f64;
    assert!((nx / nf - 0.5).abs() < 4.0 * (0.25 / nf).sqrt());

    let moments = |b: Basis| {
        let sel: Vec<&SiftedRecord> = s.records.iter().filter(|r| r.quadrature == b).collect();
        let k = sel.len() as f64;
        let vs = sel.iter().map(|r| r.s_a * r.s_a).sum::<f64>() / k;
        let vm = sel.iter().map(|r| r.m_b * r.m_b).sum::<f64>() / k;
        let cv = sel.iter().map(|r| r.s_a * r.m_b).sum::<f64>() / k;
        (vs, vm, cv, k)
    };
    let (a, b) = (moments(Basis::X), moments(Basis::P));
    let se = |v: f64| v * (2.0 / a.3.min(b.3)).sqrt() * 2f64.sqrt();
    assert!((a.0 - b.0).abs() < 4.0 * se(3.0));
    assert!((a.1 - b.1).abs() < 4.0 * se(2.7));
    assert!((a.2 - b.2).abs() < 4.0 * se(2.7));
    for r in &s.records {
        assert_eq!(r.bit_a, u8::from(r.s_a < 0.0));
        assert_eq!(r.bit_b, u8::from(r.m_b < 0.0));
    }
}

#[test]
fn regression_recovers_hand_built_channel() {
    // m = sqrt(0.5) s + n on a deterministic grid with a symmetric unit-variance
    // noise table, so the fit is exact up to rounding.
    let noise = [1.0, -1.0];
    let mut recs = Vec::new();
    for i in 1..=2000u64 {
        let s = (i as f64 / 100.0) * if i % 3 == 0 { -1.0 } else { 1.0 };
        for (k, e) in noise.iter().enumerate() {
            let idx = 2 * i + k as u64;
            if let Some(r) = SiftedRecord::new(idx, Basis::X, s, 0.5f64.sqrt() * s + e) {
                recs.push(r);
            }
        }
    }
    let est = estimate_channel(&recs).unwrap();
    assert!((est.eta_hat - 0.5).abs() < 1e-12, "{}", est.eta_hat);
    assert!(est.xi_hat.abs() < 1e-3);
}

#[test]
fn residuals_are_gaussian() {
    let n = 400_000;
    let c = ch(0.47, 0.1);
    let raw = generate(&Modulation::new(3.0).unwrap(), n, 13).unwrap();
    let recs = sift(&transmit(&c, &raw, 13), 13).records;
    let est = estimate_channel(&recs).unwrap();
    assert!(est.gaussianity_stat.abs() < 4.0 * (24.0 / n as f64).sqrt());
    assert!((est.eta_hat - 0.47).abs() < 3.0 * est.sigma_eta);
    assert!((est.xi_hat - 0.1).abs() < 3.0 * est.sigma_xi);
}

#[test]
fn standard_error_scales_as_inverse_root_n() {
    let c = ch(0.5, 0.2);
    let m = Modulation::new(4.6).unwrap();
    let recs = sift(&transmit(&c, &generate(&m, 800_000, 4).unwrap(), 4), 4).records;
    let full = empirical_rate(&recs, &c, Attack::Individual).unwrap();
    let half = empirical_rate(&recs[..recs.len() / 2], &c, Attack::Individual).unwrap();
    let ratio = half.std_error / full.std_error;
    assert!((ratio - 2f64.sqrt()).abs() < 0.05, "{ratio}");
}

fn config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        eta: 0.47,
        xi: 0.1,
        v_a: 3.2,
        n: 60_000,
        seed,
        attack: Attack::Individual,
        rate_convention: RateConvention::Sifted,
    }
}

#[test]
fn experiment_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: usize, sub: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = dir.path().join(sub);
        pool.install(|| run_experiment(&config(17), Some(&out)).unwrap())
    };
    let a = run(1, "one");
    let b = run(3, "three");
    assert_eq!(a.metadata, b.metadata);
    let (fa, fb) = (a.files.unwrap(), b.files.unwrap());
    for (x, y) in [(fa.dataset, fb.dataset), (fa.estimation, fb.estimation), (fa.metadata, fb.metadata)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let c = run_experiment(&config(18), None).unwrap();
    assert_ne!(a.metadata.delta_i_exp, c.metadata.delta_i_exp);
}

#[test]
fn dataset_round_trip_reproduces_rate_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&config(29), Some(dir.path())).unwrap();
    let files = res.files.unwrap();
    let key = read_dataset(&files.dataset).unwrap();
    let est = read_dataset(&files.estimation).unwrap();
    let meta = read_metadata(&files.metadata).unwrap();
    assert_eq!(meta, res.metadata);
    assert_eq!(key.len() + est.len() + meta.n_dropped, meta.n);

    let estimate = estimate_channel(&est).unwrap();
    assert_eq!(estimate.eta_hat, meta.eta_hat);
    assert_eq!(estimate.xi_hat, meta.xi_hat);
    let rate = empirical_rate(&key, &estimate.channel().unwrap(), meta.attack).unwrap();
    assert_eq!(rate.delta_i_exp, meta.delta_i_exp);
    assert_eq!(rate.std_error, meta.std_error);

    let copy = dir.path().join("copy.csv");
    write_dataset(&copy, &key).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&files.dataset).unwrap());
}
