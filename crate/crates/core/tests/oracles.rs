use blindinv::basis::{trapezoid_sq_integral, LevelScaling};
use blindinv::bench::config::parse_config_str;
use blindinv::bench::Preset;
use blindinv::bench::{
    emit_report, f0_closed_form, f0_coefficients, f0_trig_coefficients, read_rmise_csv,
    run_experiment, run_replication, squared_error_to_f0, ExperimentConfig, ReportFormat,
    F0_NORM_SQ,
};
use blindinv::{
    conditional_f_given_theta, galerkin_estimate, gibbs_run, laplace_singular_values,
    lepski_select, max_level, oracle_level, simulate, BasisSpec, ChainConfig, CoefficientVector,
    GalerkinConfig, LepskiConfig, LepskiGrid, Observation, OperatorModel, PriorConfig, ThetaDim,
    ThetaParam, ThetaUpdate,
};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn deconv_obs(eps: f64, delta: f64, n_sim: usize, seed: u64) -> Observation {
    let model = OperatorModel::svd_diagonal(BasisSpec::trigonometric());
    let theta0 = laplace_singular_values(0.1, n_sim).unwrap();
    simulate(
        &model,
        &f0_trig_coefficients(n_sim),
        &theta0,
        eps,
        delta,
        n_sim,
        seed,
    )
    .unwrap()
}

fn heat_obs(eps: f64, delta: f64, n_sim: usize, seed: u64) -> Observation {
    let model = OperatorModel::heat(0.1).unwrap();
    simulate(
        &model,
        &f0_coefficients(n_sim),
        &ThetaParam::Scalar(1.0),
        eps,
        delta,
        n_sim,
        seed,
    )
    .unwrap()
}

fn short_chain(seed: u64, delta: f64) -> ChainConfig {
    ChainConfig {
        burn_in: 200,
        n_keep: 400,
        thin: 2,
        ..ChainConfig::for_delta(delta, seed)
    }
}

// f0 oracle

#[test]
fn f0_series_matches_closed_form() {
    let f0 = f0_coefficients(200);
    let grid = f0.evaluate_on_grid(1000).unwrap();
    let sup = grid
        .iter()
        .map(|&(x, v)| (v - f0_closed_form(x)).abs())
        .fold(0.0, f64::max);
    assert!(sup < 1e-3, "sup error {sup}");

    // the periodic extension has a kink at 0, so the trigonometric
    // coefficients decay like k^-2 and convergence is slower
    let ft = f0_trig_coefficients(400);
    let sup_t = ft
        .evaluate_on_grid(1000)
        .unwrap()
        .iter()
        .map(|&(x, v)| (v - f0_closed_form(x)).abs())
        .fold(0.0, f64::max);
    assert!(sup_t < 1e-2, "trig sup error {sup_t}");
}

#[test]
fn f0_norm() {
    let norm_sq: f64 = f0_coefficients(20_000).l2_norm().powi(2);
    assert!((norm_sq - F0_NORM_SQ).abs() < 1e-9);
    let trig_sq = f0_trig_coefficients(20_000).l2_norm().powi(2);
    assert!((trig_sq - F0_NORM_SQ).abs() < 1e-6);
    let norm = F0_NORM_SQ.sqrt();
    assert!((norm / 1.324 - 1.0).abs() < 0.02);
    // a deconvolution RMISE of 0.1142 is quoted as 8.6% of the norm
    assert!((0.1142 / norm / 0.086 - 1.0).abs() < 0.02);
}

#[test]
fn f0_truncation_bias_decays_at_rate_five_halves() {
    // summed tail, not ‖f0‖² − ‖P_j f0‖², to avoid cancellation
    let f = f0_coefficients(200_000);
    let bias = |j: usize| {
        f.coeffs()[j..]
            .iter()
            .rev()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    };
    for j in [64usize, 128, 256] {
        let rate = -(bias(2 * j) / bias(j)).log2();
        assert!((rate - 2.5).abs() < 0.05, "j = {j}: rate {rate}");
    }
}

#[test]
fn f0_sobolev_regularity_is_below_five_halves() {
    let f = f0_coefficients(100_000);
    let increments = |s: f64| {
        let at = |n: usize| f.project(n).sobolev_norm(s).powi(2);
        let (a, b, c) = (at(1_000), at(10_000), at(100_000));
        (b - a, c - b)
    };
    let (d1, d2) = increments(2.4);
    assert!(
        d2 < d1,
        "s = 2.4 partial sums should settle: {d1} then {d2}"
    );
    let (d1, d2) = increments(2.6);
    assert!(d2 > d1, "s = 2.6 partial sums should grow: {d1} then {d2}");
}

// forward model

#[test]
fn simulated_moments() {
    let n_rep = 2000;
    let eps = 0.1;
    let delta = 0.05;
    let model = OperatorModel::heat(0.1).unwrap();
    let f0 = f0_coefficients(3);
    let rho = model.singular_values(&ThetaParam::Scalar(1.0), 3).unwrap();
    let mut sum = [0.0; 4];
    let mut sum_sq = [0.0; 4];
    for seed in 0..n_rep {
        let obs = heat_obs(eps, delta, 3, seed);
        let t = match obs.t {
            ThetaParam::Scalar(v) => v,
            _ => unreachable!(),
        };
        let resid = [
            obs.y.coeffs()[0] - rho[0] * f0.coeffs()[0],
            obs.y.coeffs()[1] - rho[1] * f0.coeffs()[1],
            obs.y.coeffs()[2] - rho[2] * f0.coeffs()[2],
            t - 1.0,
        ];
        for (k, r) in resid.iter().enumerate() {
            sum[k] += r;
            sum_sq[k] += r * r;
        }
    }
    let n = n_rep as f64;
    for k in 0..4 {
        let sd = if k < 3 { eps } else { delta };
        let mean = sum[k] / n;
        let var = sum_sq[k] / n - mean * mean;
        assert!(
            mean.abs() < 4.0 * sd / n.sqrt(),
            "coordinate {k}: mean {mean}"
        );
        assert!(
            (var / (sd * sd) - 1.0).abs() < 0.1,
            "coordinate {k}: var {var}"
        );
    }
}

// posterior

/// With δ tiny θ stays at T, so the average of the `f` draws must match the
/// closed-form conditional at `θ = T`.
#[test]
fn conjugacy_oracle_with_pinned_theta() {
    for (obs, dim, policy) in [
        (
            deconv_obs(0.1, 1e-10, 8, 3),
            ThetaDim::Sequence,
            ThetaUpdate::ExactGaussian,
        ),
        (
            heat_obs(0.05, 1e-12, 8, 3),
            ThetaDim::Scalar,
            ThetaUpdate::MetropolisHastings,
        ),
    ] {
        let basis = obs.model.basis();
        let prior = PriorConfig::new(basis, 2, 1.0, 1.0, dim).unwrap();
        let chain = ChainConfig {
            burn_in: 100,
            n_keep: 2000,
            thin: 1,
            ..ChainConfig::for_delta(obs.delta, 11)
        };
        let summary = gibbs_run(&obs, &prior, &chain, policy).unwrap();
        let t = obs.t.truncate(prior.theta_len());
        let exact = conditional_f_given_theta(&obs, &t, &prior).unwrap();
        for (k, c) in exact.iter().enumerate() {
            let se = (c.var / chain.n_keep as f64).sqrt();
            let got = summary.draw_mean_f.coeffs()[k];
            assert!(
                (got - c.mean).abs() < 3.0 * se,
                "{basis} coordinate {k}: {got} vs {} (se {se})",
                c.mean
            );
            assert!((summary.mean_f.coeffs()[k] - c.mean).abs() < 1e-6 * c.var.sqrt().max(1e-3));
        }
    }
}

/// Averaging conditional means has lower Monte Carlo variance than
/// averaging the draws themselves.
#[test]
fn rao_blackwell_reduces_variance() {
    let obs = deconv_obs(0.05, 0.05, 8, 5);
    let prior = PriorConfig::new(obs.model.basis(), 2, 1.0, 1.0, ThetaDim::Sequence).unwrap();
    let n_chains = 40;
    let (mut rb, mut plain) = (Vec::new(), Vec::new());
    for seed in 0..n_chains {
        let chain = ChainConfig {
            burn_in: 50,
            n_keep: 50,
            thin: 1,
            ..ChainConfig::for_delta(obs.delta, 100 + seed)
        };
        let s = gibbs_run(&obs, &prior, &chain, ThetaUpdate::ExactGaussian).unwrap();
        rb.push(s.mean_f);
        plain.push(s.draw_mean_f);
    }
    let spread = |v: &[CoefficientVector]| {
        let n = v.len() as f64;
        let dim = v[0].len();
        (0..dim)
            .map(|k| {
                let m = v.iter().map(|c| c.coeffs()[k]).sum::<f64>() / n;
                v.iter().map(|c| (c.coeffs()[k] - m).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .sum::<f64>()
    };
    let (v_rb, v_plain) = (spread(&rb), spread(&plain));
    assert!(v_rb < 0.5 * v_plain, "{v_rb} vs {v_plain}");
}

/// Exact Gaussian θ updates and random-walk MH target the same posterior.
#[test]
fn exact_theta_update_agrees_with_metropolis() {
    let obs = deconv_obs(0.05, 0.05, 8, 9);
    let prior = PriorConfig::new(obs.model.basis(), 2, 1.0, 1.0, ThetaDim::Sequence).unwrap();
    let chain = ChainConfig {
        burn_in: 2000,
        n_keep: 4000,
        thin: 2,
        ..ChainConfig::for_delta(obs.delta, 21)
    };
    let exact = gibbs_run(&obs, &prior, &chain, ThetaUpdate::ExactGaussian).unwrap();
    let mh = gibbs_run(&obs, &prior, &chain, ThetaUpdate::MetropolisHastings).unwrap();
    let acc = mh.acceptance_rate.unwrap();
    assert!(acc > 0.05 && acc < 0.9, "acceptance {acc}");
    let (ThetaParam::Sequence(a), ThetaParam::Sequence(b)) = (&exact.mean_theta, &mh.mean_theta)
    else {
        panic!("sequence parameters expected");
    };
    for l in 0..a.len() {
        let draws: Vec<f64> = exact.draws_theta.iter().map(|t| t.as_slice()[l]).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        assert!(
            (a[l] - b[l]).abs() < 0.3 * sd,
            "level {l}: {} vs {} (sd {sd})",
            a[l],
            b[l]
        );
    }
    for k in 0..exact.mean_f.len() {
        let sd = exact.posterior_var[k].sqrt();
        let d = (exact.mean_f.coeffs()[k] - mh.mean_f.coeffs()[k]).abs();
        assert!(d < 0.3 * sd, "coefficient {k}: diff {d} (sd {sd})");
    }
}

#[test]
fn chain_is_deterministic() {
    let obs = heat_obs(1e-3, 1e-3, 8, 1);
    let prior = PriorConfig::new(obs.model.basis(), 3, 1.0, 1.0, ThetaDim::Scalar).unwrap();
    let chain = short_chain(4, obs.delta);
    let a = gibbs_run(&obs, &prior, &chain, ThetaUpdate::MetropolisHastings).unwrap();
    let b = gibbs_run(&obs, &prior, &chain, ThetaUpdate::MetropolisHastings).unwrap();
    assert_eq!(a, b);
    let c = gibbs_run(
        &obs,
        &prior,
        &short_chain(5, obs.delta),
        ThetaUpdate::MetropolisHastings,
    )
    .unwrap();
    assert_ne!(a.draws_theta, c.draws_theta);
}

// estimator

#[test]
fn noiseless_galerkin_is_exact() {
    let model = OperatorModel::svd_diagonal(BasisSpec::trigonometric());
    let theta0 = laplace_singular_values(0.1, 12).unwrap();
    let f0 = f0_trig_coefficients(12);
    let obs = blindinv::simulate_noiseless(&model, &f0, &theta0, 12).unwrap();
    for j in 0..=12 {
        let est = galerkin_estimate(&obs, j, &GalerkinConfig::default()).unwrap();
        let d = est.f.distance(&f0.project(j));
        assert!(d < 1e-12, "level {j}: {d}");
    }
}

fn deconv_lepski(delta_tune: f64) -> LepskiConfig {
    LepskiConfig {
        delta_tune,
        ..LepskiConfig::deconvolution_default()
    }
}

#[test]
fn lepski_is_monotone_in_delta() {
    let gcfg = GalerkinConfig::default();
    let tunes = [0.05, 0.1, 0.2, 0.5, 1.0];
    for seed in 0..50u64 {
        let eps = [1e-2, 3e-3, 1e-3][(seed % 3) as usize];
        let obs = deconv_obs(eps, eps, 32, seed);
        let levels: Vec<usize> = tunes
            .iter()
            .map(|&d| lepski_select(&obs, &deconv_lepski(d), &gcfg).unwrap().0)
            .collect();
        assert!(
            levels.windows(2).all(|w| w[0] >= w[1]),
            "seed {seed}: levels {levels:?} for tunes {tunes:?}"
        );
    }
}

#[test]
fn lepski_never_exceeds_the_grid() {
    let gcfg = GalerkinConfig::default();
    for seed in 0..60u64 {
        let eps = 10f64.powf(-1.5 - (seed % 5) as f64 * 0.5);
        let geo = deconv_lepski(1.0);
        let obs = deconv_obs(eps, eps, 64, seed);
        let (j, diag) = lepski_select(&obs, &geo, &gcfg).unwrap();
        assert!(j <= *diag.candidates.last().unwrap());
        assert!(diag.candidates.contains(&j));
        let dyadic = LepskiConfig {
            grid: LepskiGrid::Dyadic,
            ..geo
        };
        let (j, _) = lepski_select(&obs, &dyadic, &gcfg).unwrap();
        assert!(j <= max_level(eps, &dyadic), "seed {seed}: {j}");
    }
}

#[test]
fn error_decreases_with_noise_level() {
    let gcfg = GalerkinConfig::default();
    let heat_cfg = LepskiConfig {
        grid: LepskiGrid::Dyadic,
        ..deconv_lepski(1.0)
    };
    let mut medians = Vec::new();
    for eps in [1e-2, 1e-3] {
        let mut heat = Vec::new();
        let mut deconv = Vec::new();
        for seed in 0..100 {
            let obs = heat_obs(eps, eps, 16, seed);
            let (j, _) = lepski_select(&obs, &heat_cfg, &gcfg).unwrap();
            heat.push(squared_error_to_f0(&galerkin_estimate(&obs, j, &gcfg).unwrap().f).sqrt());

            let obs = deconv_obs(eps, eps, 32, seed);
            let (j, _) = lepski_select(&obs, &deconv_lepski(1.0), &gcfg).unwrap();
            deconv.push(squared_error_to_f0(&galerkin_estimate(&obs, j, &gcfg).unwrap().f).sqrt());
        }
        medians.push((median(heat), median(deconv)));
    }
    assert!(medians[1].0 < medians[0].0, "heat {medians:?}");
    assert!(medians[1].1 < medians[0].1, "deconvolution {medians:?}");
}

/// Polynomially ill-posed surrogate on the dyadic sine basis: singular
/// values `2^{-lt}` per level and the sine coefficients of `f0`.
#[test]
fn lepski_stays_below_the_oracle() {
    let basis = BasisSpec {
        level_scaling: LevelScaling::Dyadic,
        ..BasisSpec::sine()
    };
    let t_ill = 1.0;
    let n_sim = 7;
    let model = OperatorModel::svd_diagonal(basis);
    let theta0 = ThetaParam::Sequence((0..=n_sim).map(|l| 2f64.powf(-t_ill * l as f64)).collect());
    let sine = f0_coefficients(basis.dim(n_sim));
    let f0 = CoefficientVector::new(basis, n_sim, sine.coeffs().to_vec()).unwrap();
    let cfg = LepskiConfig {
        delta_tune: 1.0,
        s0: 1.0,
        t_ill,
        dim_d: 1,
        b: 2.0,
        exponent_override: None,
        grid: LepskiGrid::Dyadic,
    };
    let eps = 1e-4;
    let radius = f0.sobolev_norm(2.4);
    let j_o = oracle_level(eps, &cfg, radius, 2.4).unwrap();
    let gcfg = GalerkinConfig::default();
    let below = (0..200u64)
        .filter(|&seed| {
            let obs = simulate(&model, &f0, &theta0, eps, eps, n_sim, seed).unwrap();
            lepski_select(&obs, &cfg, &gcfg).unwrap().0 <= j_o
        })
        .count();
    assert!(below >= 190, "{below} of 200 at or below J_o = {j_o}");
}

const HEAT_HIGH_NOISE_SEEDS: u64 = 100;

fn heat_galerkin_errors() -> Vec<f64> {
    let gcfg = GalerkinConfig::default();
    (0..HEAT_HIGH_NOISE_SEEDS)
        .map(|seed| {
            let obs = heat_obs(1e-8, 1e-8, 16, seed);
            squared_error_to_f0(&galerkin_estimate(&obs, 4, &gcfg).unwrap().f).sqrt()
        })
        .collect()
}

/// Claimed: `‖f̂_4 − f0‖ < 0.1` in at least 95 of 100 seeds at ε = δ = 1e-8.
#[test]
fn heat_galerkin_level_four_is_accurate() {
    let hits = heat_galerkin_errors().iter().filter(|&&e| e < 0.1).count();
    assert!(hits >= 95, "{hits} of 100 seeds below 0.1");
}

/// The same frequency against its Gaussian closed form: the error is
/// dominated by the truncation bias and the noise `ε/ρ_4` on coefficient 4.
#[test]
fn heat_galerkin_level_four_matches_gaussian_oracle() {
    let errors = heat_galerkin_errors();
    let hits = errors.iter().filter(|&&e| e < 0.1).count() as f64 / errors.len() as f64;
    let bias_sq = F0_NORM_SQ - f0_coefficients(4).l2_norm().powi(2);
    let sd4 = 1e-8 / (-1.6 * std::f64::consts::PI.powi(2)).exp();
    let z = ((0.01 - bias_sq) / (sd4 * sd4)).sqrt();
    // P(|Z| < z) via the error function series, adequate for z < 3
    let erf = |x: f64| {
        let mut term = x;
        let mut sum = x;
        for n in 1..60 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    };
    let p = erf(z / std::f64::consts::SQRT_2);
    let se = (p * (1.0 - p) / errors.len() as f64).sqrt();
    assert!((hits - p).abs() < 3.0 * se, "observed {hits}, oracle {p}");
}

// bench

fn tiny_heat() -> ExperimentConfig {
    ExperimentConfig {
        n_mc: 6,
        burn_in: 100,
        n_keep: 50,
        thin: 2,
        eps_grid: vec![1e-4, 1e-6],
        delta_grid: vec![1e-6],
        ..ExperimentConfig::heat_preset()
    }
}

#[test]
fn report_is_deterministic_and_round_trips() {
    let cfg = tiny_heat();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, ReportFormat::Csv, da.path()).unwrap();
    emit_report(&b, ReportFormat::Csv, db.path()).unwrap();
    for name in ["rmise.csv", "lepski_hist.csv", "records.csv", "config.txt"] {
        let x = std::fs::read(da.path().join(name)).unwrap();
        let y = std::fs::read(db.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    let rows = read_rmise_csv(std::fs::File::open(da.path().join("rmise.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), a.cells.len());
    for (row, cell) in rows.iter().zip(&a.cells) {
        assert_eq!(row.rmise_post.to_bits(), cell.rmise_post.to_bits());
        assert_eq!(row.rmise_galerkin.to_bits(), cell.rmise_galerkin.to_bits());
        assert_eq!(row.rmse_theta.to_bits(), cell.rmse_theta.to_bits());
        assert_eq!(row.eps.to_bits(), cell.eps.to_bits());
        assert_eq!(row.n_mc, cell.n_mc);
    }
    let svgs = emit_report(&a, ReportFormat::SvgPlots, da.path()).unwrap();
    assert_eq!(svgs.len(), 2);
    let svg = std::fs::read_to_string(&svgs[0]).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn one_cell_report_has_one_row() {
    let cfg = ExperimentConfig {
        eps_grid: vec![1e-4],
        ..tiny_heat()
    };
    let report = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("rmise.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn empty_grid_is_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let text = format!("eps =\noutput_dir = {}\n", out.display());
    let err = parse_config_str(&text, Preset::Heat61).unwrap_err();
    assert!(err.is_config_error());
    assert!(!out.exists());
}

/// RMISE from coefficients equals RMISE from quadrature against the closed
/// form of f0 on 2^14 + 1 points.
#[test]
fn coefficient_error_matches_quadrature() {
    let cfg = ExperimentConfig {
        n_mc: 1,
        ..tiny_heat()
    };
    for eps in [1e-4, 1e-6] {
        let out = run_replication(&cfg, eps, 1e-6, 0).unwrap();
        let est = out.summary.unwrap().mean_f;
        let coeff = squared_error_to_f0(&est);
        let grid: Vec<(f64, f64)> = est
            .evaluate_on_grid((1 << 14) + 1)
            .unwrap()
            .into_iter()
            .map(|(x, v)| (x, v - f0_closed_form(x)))
            .collect();
        let quad = trapezoid_sq_integral(&grid);
        assert!(
            (coeff.sqrt() - quad.sqrt()).abs() < 1e-4,
            "{coeff} vs {quad}"
        );
    }
}

#[test]
fn rmise_decreases_along_the_diagonal() {
    let mut rmise = Vec::new();
    for noise in [1e-4, 1e-6, 1e-8] {
        let cfg = ExperimentConfig {
            n_mc: 100,
            eps_grid: vec![noise],
            delta_grid: vec![noise],
            burn_in: 300,
            n_keep: 100,
            thin: 2,
            ..ExperimentConfig::heat_preset()
        };
        rmise.push(run_experiment(&cfg).unwrap().cells[0].rmise_post);
    }
    assert!(rmise[2] < rmise[1] && rmise[1] < rmise[0], "{rmise:?}");
}
