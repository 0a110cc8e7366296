use cbo_games::lab::decay::{check_decay_regime, rate_floor};
use cbo_games::lab::report::mean_series;
use cbo_games::lab::stability::{draw_pair, stability_ratio};
use cbo_games::lab::*;
use cbo_games::metrics::EmpiricalMeasure;
use cbo_games::{builtin_game, CboParams, Diffusion, Error, Law};

fn params(t_end: f64) -> CboParams {
    CboParams {
        lambda: 1.0,
        sigma: 0.5,
        alpha: 40.0,
        xi: 1.0,
        dt: 0.01,
        t_end,
        diffusion: Diffusion::Anisotropic,
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string(value).unwrap()
}

/// Gating a report that went through JSON reproduces its fits and verdicts.
fn assert_regate_pure(report: &ExperimentReport) {
    let text = serde_json::to_string_pretty(report).unwrap();
    let back: ExperimentReport = serde_json::from_str(&text).unwrap();
    let (fits, verdicts) = regate(&back).unwrap();
    assert_eq!(json(&fits), json(&report.fits), "{}", report.name);
    assert_eq!(json(&verdicts), json(&report.verdicts), "{}", report.name);
    assert_eq!(json(&back), json(report));
}

#[test]
fn rate_floor_example() {
    assert_eq!(rate_floor(&params(1.0)), 0.875);
}

#[test]
fn decay_regime_is_enforced() {
    let p = CboParams { sigma: 1.5, ..params(1.0) };
    let err = check_decay_regime(&p).unwrap_err();
    assert!(err.to_string().contains("decay regime violated (2λ > σ² required)"), "{err}");
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    assert!(matches!(run_variance_decay(&g, &p, &DecayConfig::default()), Err(Error::Config(_))));
}

#[test]
fn single_particle_decay_fails_honestly() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let p = CboParams { sigma: 0.0, ..params(2.0) };
    let cfg = DecayConfig { particles: 1, seeds: vec![0, 1], ..DecayConfig::default() };
    let report = run_variance_decay(&g, &p, &cfg).unwrap();
    let trace = report.series("v_trace").unwrap();
    let v = trace.column("V_total").unwrap();
    assert!(v.iter().all(|x| *x == v[0]));
    assert!(!report.passed());
    assert!(!report.verdict("terminal_ratio").unwrap().passed);
    assert_regate_pure(&report);
}

#[test]
fn decay_report_layout() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let cfg = DecayConfig { particles: 50, seeds: vec![0, 1, 2], ..DecayConfig::default() };
    let report = run_variance_decay(&g, &params(4.0), &cfg).unwrap();
    let trace = report.series("v_trace").unwrap();
    assert_eq!(trace.columns, ["time", "V_1", "V_2", "V_total"]);
    assert_eq!(trace.rows.len(), 41);
    assert_eq!(report.seed_count, 3);
    assert!(report.fits.contains_key("v_decay"));
    assert_regate_pure(&report);
}

#[test]
fn seed_average_ignores_seed_order() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let cfg = DecayConfig { particles: 30, seeds: vec![4, 9, 1, 7], ..DecayConfig::default() };
    let report = run_variance_decay(&g, &params(1.0), &cfg).unwrap();
    let raw: Vec<Series> = report.per_seed.iter().map(|s| s.series.clone()).collect();
    let mut reversed = raw.clone();
    reversed.reverse();
    reversed.swap(0, 2);
    assert_eq!(json(&mean_series(&raw)), json(&mean_series(&reversed)));
    let shuffled = DecayConfig { seeds: vec![7, 1, 9, 4], ..cfg };
    let other = run_variance_decay(&g, &params(1.0), &shuffled).unwrap();
    assert_eq!(json(&report.aggregated), json(&other.aggregated));
}

#[test]
fn mf_rate_rejects_degenerate_sizes() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    for n_list in [vec![256], vec![16, 32]] {
        let cfg = MfRateConfig { n_list, n_ref: 64, ..MfRateConfig::default() };
        let cfg = if cfg.n_list == [256] { MfRateConfig { n_ref: 256, ..cfg } } else { cfg };
        assert!(run_mf_rate(&g, &params(1.0), &cfg).is_err());
    }
}

#[test]
fn self_coupled_gap_is_zero() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let law = Law::Uniform { low: -3.0, high: 3.0 };
    let gaps = coupled_sup_gaps(&g, &params(2.0), &law, &[64, 8], 64, 2.0, 5).unwrap();
    assert!(gaps[0].iter().all(|g| *g == 0.0));
    assert!(gaps[1].iter().any(|g| *g > 0.0));
}

#[test]
fn mf_rate_small_run_is_consistent() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let cfg = MfRateConfig { n_list: vec![4, 8, 16], n_ref: 64, seeds: vec![0, 1], ..MfRateConfig::default() };
    let report = run_mf_rate(&g, &params(1.0), &cfg).unwrap();
    let table = report.series("mf_rate").unwrap();
    assert_eq!(table.columns, ["N", "gap", "gap_stderr"]);
    assert_eq!(table.column("N").unwrap(), vec![4.0, 8.0, 16.0]);
    assert!(table.column("gap").unwrap().iter().all(|g| *g > 0.0));
    assert_regate_pure(&report);
}

fn small_iid(alpha: f64) -> IidConfig {
    IidConfig {
        alpha,
        n_list: vec![10, 100, 1000],
        trials: 20,
        oracle_samples: 200_000,
        oracle_tolerance: 1e-2,
        ..IidConfig::default()
    }
}

#[test]
fn point_mass_has_no_sampling_error() {
    let cfg = IidConfig { law: Law::Point { at: vec![0.5, -1.0] }, ..small_iid(1.0) };
    let report = run_iid_consensus(&bounded_bump(), &cfg).unwrap();
    let table = report.series("iid").unwrap();
    assert_eq!(table.columns, ["N", "err", "err_stderr"]);
    assert!(table.column("err").unwrap().iter().all(|e| *e == 0.0));
    assert!(!report.passed());
    assert_regate_pure(&report);
}

#[test]
fn unstable_oracle_is_an_error() {
    let cfg = IidConfig { oracle_samples: 50, oracle_tolerance: 1e-6, ..small_iid(1.0) };
    assert!(matches!(run_iid_consensus(&bounded_bump(), &cfg), Err(Error::OracleUnstable { .. })));
}

#[test]
fn zero_alpha_reproduces_the_clt_slope() {
    let cfg = IidConfig { alpha: 0.0, slope_tolerance: 0.05, ..IidConfig::default() };
    let report = run_iid_consensus(&bounded_bump(), &cfg).unwrap();
    let slope = report.fits["err_power_law"].slope;
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
    assert!(report.passed());
    assert_regate_pure(&report);
}

#[test]
fn identical_tuples_have_zero_ratio() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let (mu, _) = draw_pair(&g, &StabilityConfig::default(), 3).unwrap();
    let (ratio, delta, w) = stability_ratio(&g, &mu, &mu, 1.0, 2.0).unwrap();
    assert_eq!((ratio, delta, w), (0.0, 0.0, 0.0));
}

#[test]
fn sampled_measures_respect_the_moment_bound() {
    let g = builtin_game("coupled-quadratic", 3, 2, 0.3).unwrap();
    let cfg = StabilityConfig::default();
    for trial in 0..100 {
        let (mu, nu) = draw_pair(&g, &cfg, trial).unwrap();
        for m in mu.iter().chain(&nu) {
            assert!(m.moment(cfg.p) <= cfg.radius);
        }
    }
}

#[test]
fn translation_ratio_converges() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let cfg = StabilityConfig { trials: 100, ..StabilityConfig::default() };
    let report = run_stability_probe(&g, &cfg).unwrap();
    let ratios = report.series("translation").unwrap().column("ratio").unwrap();
    let tail = &ratios[ratios.len() - 3..];
    assert!(tail.iter().all(|r| r.is_finite() && *r > 0.0));
    assert!((tail[2] - tail[1]).abs() <= (tail[1] - tail[0]).abs() + 1e-12);
    assert!(report.verdict("max_ratio").unwrap().passed);
    assert_regate_pure(&report);
}

#[test]
fn stability_ratio_is_symmetric() {
    let g = builtin_game("rastrigin-coupled", 2, 1, 0.2).unwrap();
    let mu = vec![
        EmpiricalMeasure::from_points(&[vec![0.0], vec![1.0]]).unwrap(),
        EmpiricalMeasure::from_points(&[vec![0.5], vec![-0.5]]).unwrap(),
    ];
    let nu = vec![
        EmpiricalMeasure::from_points(&[vec![0.2], vec![1.3]]).unwrap(),
        EmpiricalMeasure::from_points(&[vec![0.5], vec![-0.5]]).unwrap(),
    ];
    let a = stability_ratio(&g, &mu, &nu, 1.0, 2.0).unwrap();
    let b = stability_ratio(&g, &nu, &mu, 1.0, 2.0).unwrap();
    assert_eq!(a, b);
    assert!(a.0 > 0.0 && a.0.is_finite());
}

#[test]
fn static_ensemble_has_finite_kappa() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let p = CboParams { lambda: 0.0, sigma: 0.0, ..params(1.0) };
    let cfg = MomentConfig { particles: 20, seeds: vec![0, 1], ..MomentConfig::default() };
    let report = run_moment_monitor(&g, &p, &cfg).unwrap();
    let kappa = kappa_hat(&report).unwrap().unwrap();
    assert!(kappa.is_finite() && kappa > 0.0);
    assert!(report.passed());
    assert_regate_pure(&report);
}

#[test]
fn zero_initial_moment_switches_to_absolute_ceiling() {
    let g = builtin_game("decoupled-quadratic", 2, 2, 0.0).unwrap();
    let p = CboParams { lambda: 0.0, xi: 0.0, ..params(1.0) };
    let cfg = MomentConfig {
        particles: 10,
        seeds: vec![0],
        init: Law::Point { at: vec![0.0, 0.0] },
        ..MomentConfig::default()
    };
    let report = run_moment_monitor(&g, &p, &cfg).unwrap();
    assert_eq!(kappa_hat(&report).unwrap(), None);
    let v = report.verdict("sup_moment_ceiling").unwrap();
    assert_eq!(v.comparison, Comparison::AtMost { limit: 1e3 * 0.25 * 1.0 * 2.0 });
    assert!(report.passed());
    assert_regate_pure(&report);
}

#[test]
fn relaxed_and_standard_dynamics_stay_bounded() {
    let g = builtin_game("coupled-quadratic", 2, 2, 0.3).unwrap();
    for xi in [0.0, 0.5, 1.0] {
        let cfg = MomentConfig { particles: 40, seeds: vec![0, 1], ..MomentConfig::default() };
        let report = run_moment_monitor(&g, &CboParams { xi, ..params(3.0) }, &cfg).unwrap();
        assert!(report.passed(), "xi = {xi}: {:?}", report.verdicts);
    }
}

#[test]
fn nash_search_small_run() {
    let g = builtin_game("rastrigin-coupled", 2, 2, 0.1).unwrap();
    let p = CboParams { alpha: 100.0, sigma: 0.3, ..params(5.0) };
    let cfg = NashConfig { particles: 100, seeds: vec![0, 1, 2], min_hits: 2, probe_budget: 2000, ..NashConfig::default() };
    let report = run_nash_search(&g, &p, &cfg).unwrap();
    assert_eq!(report.series("consensus").unwrap().rows.len(), 3);
    assert_regate_pure(&report);
}

#[test]
fn selftest_passes() {
    let report = run_selftest(0).unwrap();
    assert!(report.passed(), "{:?}", report.verdicts);
}

#[test]
fn unknown_reports_cannot_be_regated() {
    let report = ExperimentReport::new("mystery", serde_json::json!({}));
    assert!(regate(&report).is_err());
}

#[test]
fn non_finite_values_survive_json() {
    let mut report = ExperimentReport::new("mystery", serde_json::json!({}));
    let mut s = Series::new(["a", "b", "c"]);
    s.push(vec![f64::NAN, f64::INFINITY, f64::NEG_INFINITY]);
    report.aggregated.insert("x".into(), s);
    report.verdicts.push(Verdict::at_most("v", f64::NAN, 1.0));
    let back: ExperimentReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    let row = &back.aggregated["x"].rows[0];
    assert!(row[0].is_nan() && row[1] == f64::INFINITY && row[2] == f64::NEG_INFINITY);
    assert!(back.verdicts[0].measured.is_nan() && !back.verdicts[0].passed);
}
