use psqkd_core::dataset::{read_dataset, read_metadata};
use psqkd_core::eve::{critical_line, ClonerModel};
use psqkd_core::keyrate::{
    asymptote_slopes, contour_band, contour_grid, noise_threshold, optimize_modulation, region_map,
    secure_rate, separability_bound, sweep_noise,
};
use psqkd_core::simulator::{empirical_rate, estimate_channel, run_experiment};
use psqkd_core::{
    Attack, Channel, ChannelEstimate, Error, ExperimentConfig, Modulation, RateConvention,
    VaChoice,
};
use serde_json::json;

use crate::args::{
    AttackArg, ChannelArgs, ContourArgs, ConventionArg, EstimateArgs, OutputArgs, RateArgs,
    RegionArgs, SimulateArgs, SweepArgs, ThresholdArgs, VaArgs,
};
use crate::output::{linspace, num, opt, Table};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn attacks(a: AttackArg) -> Vec<Attack> {
    match a {
        AttackArg::Individual => vec![Attack::Individual],
        AttackArg::Collective => vec![Attack::Collective],
        AttackArg::Both => vec![Attack::Individual, Attack::Collective],
    }
}

fn attack_label(a: AttackArg) -> &'static str {
    match a {
        AttackArg::Individual => "individual",
        AttackArg::Collective => "collective",
        AttackArg::Both => "both",
    }
}

fn convention(c: ConventionArg) -> RateConvention {
    match c {
        ConventionArg::Sifted => RateConvention::Sifted,
        ConventionArg::ChannelUse => RateConvention::ChannelUse,
    }
}

fn va_choice(va: &VaArgs) -> Result<VaChoice> {
    match (va.va, va.optimize_va) {
        (Some(v), _) => {
            Modulation::new(v)?;
            Ok(VaChoice::Fixed(v))
        }
        (None, true) => Ok(VaChoice::Optimize),
        (None, false) => Ok(VaChoice::IndividualOptimum),
    }
}

fn va_label(v: VaChoice) -> String {
    match v {
        VaChoice::Optimize => "optimized per attack".into(),
        VaChoice::IndividualOptimum => "individual-attack optimum".into(),
        VaChoice::Fixed(v) => v.to_string(),
    }
}

/// Validates the channel and that it lies inside the attack model.
fn channel(c: &ChannelArgs) -> Result<Channel> {
    let ch = Channel::new(c.eta, c.xi)?;
    ClonerModel::new(ch)?;
    Ok(ch)
}

fn positive_count(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(CliError::Usage(format!("--{name} must be at least 1")));
    }
    Ok(())
}

fn ordered(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Usage(format!(
            "--{name}-min must not exceed --{name}-max (got {lo} and {hi})"
        )));
    }
    Ok(())
}

fn common_meta(t: &mut Table, command: &str, out: &OutputArgs) -> RateConvention {
    let conv = convention(out.rate_convention);
    t.meta("command", command)
        .meta("rate_convention", conv.to_string())
        .meta("rate_unit", conv.label());
    conv
}

fn finish(t: &Table, out: &OutputArgs) -> Result<()> {
    t.write(out.format, out.out.as_deref())?;
    Ok(())
}

pub fn rate(a: &RateArgs) -> Result<()> {
    let ch = channel(&a.channel)?;
    let va = va_choice(&a.va)?;
    let xi0 = noise_threshold(ch.eta())?;
    let insecure = ch.xi() >= xi0;

    let mut t = Table::new(vec![
        "attack", "eta", "xi", "v_a", "delta_i", "integration_error", "xi_threshold", "insecure",
        "note",
    ]);
    let conv = common_meta(&mut t, "rate", &a.output);
    t.meta("eta", ch.eta())
        .meta("xi", ch.xi())
        .meta("va", va_label(va))
        .meta("attack", attack_label(a.attack));
    if insecure {
        log::warn!("insecure: xi ≥ threshold ({} ≥ {xi0:.6}); reporting zero rate", ch.xi());
    }

    for attack in attacks(a.attack) {
        if insecure {
            let v = match va {
                VaChoice::Fixed(v) => Some(v),
                _ => None,
            };
            let note = "insecure: xi ≥ threshold";
            t.push(vec![
                json!(attack.to_string()),
                num(ch.eta()),
                num(ch.xi()),
                opt(v),
                num(0.0),
                num(0.0),
                num(xi0),
                json!(true),
                json!(note),
            ]);
            continue;
        }
        let (v_a, r) = match va {
            VaChoice::Fixed(v) => (v, secure_rate(&ch, &Modulation::new(v)?, attack)?),
            VaChoice::Optimize => {
                let o = optimize_modulation(&ch, attack)?;
                (o.v_a_opt, o.rate)
            }
            VaChoice::IndividualOptimum => {
                let o = optimize_modulation(&ch, Attack::Individual)?;
                let r = if attack == Attack::Individual {
                    o.rate
                } else {
                    secure_rate(&ch, &Modulation::new(o.v_a_opt)?, attack)?
                };
                (o.v_a_opt, r)
            }
        };
        t.push(vec![
            json!(attack.to_string()),
            num(ch.eta()),
            num(ch.xi()),
            num(v_a),
            num(r.delta_i_total * conv.factor()),
            num(r.integration_estimate_error * conv.factor()),
            num(xi0),
            json!(false),
            json!(""),
        ]);
    }
    finish(&t, &a.output)
}

pub fn region(a: &RegionArgs) -> Result<()> {
    let ch = channel(&a.channel)?;
    if !(a.s_max > 0.0 && a.s_max.is_finite() && a.m_max > 0.0 && a.m_max.is_finite()) {
        return Err(CliError::Usage("--s-max and --m-max must be positive".into()));
    }
    if a.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let slopes = match asymptote_slopes(&ch) {
        Ok(k) => Some(k),
        Err(Error::InvalidParameter(_)) | Err(Error::NoSecureAsymptotes { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let mut t = Table::new(vec![
        "attack",
        "s_abs",
        "m_abs",
        "delta_i",
        "kept",
        "eve_target",
        "m_critical",
        "asymptote_lower",
        "asymptote_upper",
    ]);
    common_meta(&mut t, "region", &a.output);
    t.meta("eta", ch.eta())
        .meta("xi", ch.xi())
        .meta("attack", attack_label(a.attack))
        .meta("s_max", a.s_max)
        .meta("m_max", a.m_max)
        .meta("grid", a.grid as u64)
        .meta("asymptote_slope_lower", opt(slopes.map(|k| k.0)))
        .meta("asymptote_slope_upper", opt(slopes.map(|k| k.1)))
        .meta("xi_threshold", noise_threshold(ch.eta())?);

    for attack in attacks(a.attack) {
        let map = region_map(&ch, attack, a.s_max, a.m_max, a.grid, a.grid)?;
        t.meta(&format!("kept_cells_{attack}"), map.kept_count() as u64);
        for (i, &s) in map.s_grid.iter().enumerate() {
            let crit = opt(critical_line(&ch, s));
            let (lo, hi) = (opt(slopes.map(|k| k.0 * s)), opt(slopes.map(|k| k.1 * s)));
            for (j, &m) in map.m_grid.iter().enumerate() {
                t.push(vec![
                    json!(attack.to_string()),
                    num(s),
                    num(m),
                    num(map.values[i][j]),
                    json!(map.kept[i][j]),
                    json!(map.targets[i][j].to_string()),
                    crit.clone(),
                    lo.clone(),
                    hi.clone(),
                ]);
            }
        }
    }
    finish(&t, &a.output)
}

pub fn threshold(a: &ThresholdArgs) -> Result<()> {
    ordered("eta", a.eta_min, a.eta_max)?;
    positive_count("points", a.points)?;
    if !(a.eta_min > 0.0 && a.eta_max <= 1.0) {
        return Err(CliError::Usage("transmission grid must lie in (0, 1]".into()));
    }
    let mut t = Table::new(vec!["eta", "xi_threshold", "separability_bound"]);
    common_meta(&mut t, "threshold", &a.output);
    t.meta("eta_min", a.eta_min)
        .meta("eta_max", a.eta_max)
        .meta("points", a.points as u64);
    for eta in linspace(a.eta_min, a.eta_max, a.points) {
        t.push(vec![num(eta), num(noise_threshold(eta)?), num(separability_bound(eta))]);
    }
    finish(&t, &a.output)
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    Channel::new(a.eta, 0.0)?;
    positive_count("points", a.points)?;
    let va = va_choice(&a.va)?;
    let xi0 = noise_threshold(a.eta)?;
    let xi_max = a.xi_max.unwrap_or(1.1 * xi0);
    ordered("xi", a.xi_min, xi_max)?;
    Channel::new(a.eta, a.xi_min)?;
    let xi_list = linspace(a.xi_min, xi_max, a.points);
    for &xi in &xi_list {
        ClonerModel::new(Channel::new(a.eta, xi)?)?;
    }

    let mut t = Table::new(vec![
        "attack", "eta", "xi", "v_a", "delta_i", "integration_error", "insecure",
    ]);
    let conv = common_meta(&mut t, "sweep", &a.output);
    t.meta("eta", a.eta)
        .meta("xi_min", a.xi_min)
        .meta("xi_max", xi_max)
        .meta("points", a.points as u64)
        .meta("va", va_label(va))
        .meta("attack", attack_label(a.attack))
        .meta("xi_threshold", xi0);
    for attack in attacks(a.attack) {
        for p in sweep_noise(a.eta, &xi_list, attack, va)? {
            t.push(vec![
                json!(attack.to_string()),
                num(a.eta),
                num(p.xi),
                opt(p.v_a),
                num(p.delta_i * conv.factor()),
                num(p.integration_error * conv.factor()),
                json!(p.insecure),
            ]);
        }
    }
    finish(&t, &a.output)
}

pub fn contour(a: &ContourArgs) -> Result<()> {
    ordered("eta", a.eta_min, a.eta_max)?;
    ordered("xi", a.xi_min, a.xi_max)?;
    positive_count("eta-points", a.eta_points)?;
    positive_count("xi-points", a.xi_points)?;
    Channel::new(a.eta_min, a.xi_min)?;
    Channel::new(a.eta_max, a.xi_max)?;
    let etas = linspace(a.eta_min, a.eta_max, a.eta_points);
    let xis = linspace(a.xi_min, a.xi_max, a.xi_points);

    let mut t = Table::new(vec![
        "attack", "eta", "xi", "delta_i", "v_a", "contour_level", "insecure", "separable",
    ]);
    let conv = common_meta(&mut t, "contour", &a.output);
    t.meta("eta_min", a.eta_min)
        .meta("eta_max", a.eta_max)
        .meta("eta_points", a.eta_points as u64)
        .meta("xi_min", a.xi_min)
        .meta("xi_max", a.xi_max)
        .meta("xi_points", a.xi_points as u64)
        .meta("attack", attack_label(a.attack))
        .meta("va", "optimized per cell")
        .meta("contour_levels", "1e-1 1e-2 1e-3 1e-4 1e-7");
    for attack in attacks(a.attack) {
        for c in contour_grid(&etas, &xis, attack)? {
            let d = c.delta_i * conv.factor();
            t.push(vec![
                json!(attack.to_string()),
                num(c.eta),
                num(c.xi),
                num(d),
                opt(c.v_a),
                opt(contour_band(d)),
                json!(c.insecure),
                json!(c.separable),
            ]);
        }
    }
    finish(&t, &a.output)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let ch = channel(&a.channel)?;
    let attack = match a.attack {
        AttackArg::Individual => Attack::Individual,
        AttackArg::Collective => Attack::Collective,
        AttackArg::Both => {
            return Err(CliError::Usage(
                "simulate rates one attack per run; choose individual or collective".into(),
            ))
        }
    };
    let v_a = match va_choice(&a.va)? {
        VaChoice::Fixed(v) => v,
        choice => {
            let target = if choice == VaChoice::Optimize { attack } else { Attack::Individual };
            optimize_modulation(&ch, target)
                .map_err(|e| match e {
                    Error::ModelDomain(msg) => {
                        Error::ModelDomain(format!("{msg}; pass --va to simulate anyway"))
                    }
                    other => other,
                })?
                .v_a_opt
        }
    };
    let conv = convention(a.output.rate_convention);
    let cfg = ExperimentConfig {
        eta: ch.eta(),
        xi: ch.xi(),
        v_a,
        n: a.n,
        seed: a.seed,
        attack,
        rate_convention: conv,
    };
    let res = run_experiment(&cfg, a.data_dir.as_deref())?;
    let theory = secure_rate(&ch, &Modulation::new(v_a)?, attack)?.delta_i_total * conv.factor();
    let m = &res.metadata;

    let mut t = Table::new(vec![
        "eta",
        "xi",
        "v_a",
        "n",
        "seed",
        "attack",
        "eta_hat",
        "sigma_eta",
        "xi_hat",
        "sigma_xi",
        "delta_i_exp",
        "std_error",
        "param_error",
        "total_error",
        "delta_i_theory",
        "n_key",
        "n_kept",
    ]);
    common_meta(&mut t, "simulate", &a.output);
    t.meta("seed", a.seed)
        .meta("n", a.n as u64)
        .meta("gaussianity_stat", num(m.gaussianity_stat))
        .meta("n_estimation", m.n_estimation as u64)
        .meta("n_dropped", m.n_dropped as u64);
    if let Some(f) = &res.files {
        t.meta("dataset", f.dataset.display().to_string())
            .meta("estimation", f.estimation.display().to_string())
            .meta("metadata", f.metadata.display().to_string());
    }
    t.push(vec![
        num(m.eta),
        num(m.xi),
        num(m.v_a),
        json!(m.n),
        json!(m.seed),
        json!(attack.to_string()),
        num(m.eta_hat),
        num(m.sigma_eta),
        num(m.xi_hat),
        num(m.sigma_xi),
        num(m.delta_i_exp),
        num(m.std_error),
        num(m.param_error),
        num(m.total_error),
        num(theory),
        json!(m.n_key),
        json!(m.n_kept),
    ]);
    finish(&t, &a.output)
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let records = read_dataset(&a.input)?;
    let mut t = Table::new(vec![
        "source",
        "n_records",
        "eta_hat",
        "sigma_eta",
        "xi_hat",
        "sigma_xi",
        "gaussianity_stat",
        "v_a_hat",
        "attack",
        "delta_i_exp",
        "std_error",
        "n_kept",
        "recorded_delta_i_exp",
    ]);
    let conv = common_meta(&mut t, "estimate", &a.output);
    t.meta("input", a.input.display().to_string());

    let (source, est, attack, recorded, factor) = match &a.metadata {
        Some(path) => {
            let m = read_metadata(path)?;
            t.meta("metadata", path.display().to_string())
                .meta("rate_convention", m.rate_convention.to_string())
                .meta("rate_unit", m.rate_convention.label());
            let est = ChannelEstimate {
                eta_hat: m.eta_hat,
                sigma_eta: m.sigma_eta,
                xi_hat: m.xi_hat,
                sigma_xi: m.sigma_xi,
                n_used: m.n_estimation,
                gaussianity_stat: m.gaussianity_stat,
                v_a_hat: f64::NAN,
                xi_clamped: false,
                eta_clamped: false,
            };
            let factor = m.rate_convention.factor();
            ("metadata", est, m.attack, Some(m.delta_i_exp), factor)
        }
        None => {
            let attack = match a.attack {
                AttackArg::Individual => Attack::Individual,
                AttackArg::Collective => Attack::Collective,
                AttackArg::Both => {
                    return Err(CliError::Usage(
                        "estimate rates one attack; choose individual or collective".into(),
                    ))
                }
            };
            ("dataset", estimate_channel(&records)?, attack, None, conv.factor())
        }
    };
    let rate = empirical_rate(&records, &est.channel()?, attack)?;
    let delta = rate.delta_i_exp * factor;
    if let Some(r) = recorded {
        t.meta("reproduces_recorded", json!(delta == r));
    }
    t.push(vec![
        json!(source),
        json!(records.len()),
        num(est.eta_hat),
        num(est.sigma_eta),
        num(est.xi_hat),
        num(est.sigma_xi),
        num(est.gaussianity_stat),
        num(est.v_a_hat),
        json!(attack.to_string()),
        num(delta),
        num(rate.std_error * factor),
        json!(rate.n_kept),
        opt(recorded),
    ]);
    finish(&t, &a.output)
}
