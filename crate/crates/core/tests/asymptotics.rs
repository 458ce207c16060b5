use plap_core::asymptotics::limit_test_pair;
use plap_core::energy::schedule_alpha;
use plap_core::{
    build_interval, infimum_i_abd, j_infinity, lambda_infinity, rayleigh_jp,
    residuals_limit_system, sweep_p, LimitParams, ProblemParams, SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn infimum_agrees_with_closed_form_on_seeded_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    for _ in 0..50 {
        let g = rng.random_range(0.05..0.95);
        let r = rng.random_range(0.05..0.95);
        let s = rng.random_range(0.05..0.95);
        let rad = rng.random_range(0.2..5.0);
        let lp = LimitParams::new(g, r, s, rad).unwrap();
        let exact = lambda_infinity(&lp).unwrap();
        let inf = infimum_i_abd(&lp);
        assert!((inf - exact).abs() <= 1e-3, "{lp:?}: {inf} vs {exact}");
    }
}

#[test]
fn test_pair_certifies_the_limit() {
    for (len, want) in [(2.0, 1.0), (4.0, 2f64.powf(-0.5))] {
        let d = build_interval(0.0, len, 400).unwrap();
        let lp = LimitParams::for_domain(&d, 0.5, 0.25, 0.75).unwrap();
        assert_eq!(lambda_infinity(&lp).unwrap(), want);
        let (w, z) = limit_test_pair(&d, &lp);
        let j = j_infinity(&w, &z, &lp).unwrap();
        assert!((j - want).abs() <= 0.02 * want, "R = {}: {j}", len / 2.0);
    }
}

#[test]
fn sweep_gap_shrinks_and_stays_under_test_pair() {
    let d = build_interval(0.0, 2.0, 150).unwrap();
    let (g, r, s) = (0.5, 0.25, 0.75);
    let ps = [4.0, 16.0, 64.0];
    let rows = sweep_p(&d, g, r, s, &ps, &SolverOptions::default()).unwrap();
    assert!(rows.iter().all(|row| row.converged));
    assert!(rows.windows(2).all(|w| w[1].gap < w[0].gap));
    assert!(rows[2].gap <= 0.1);

    let lp = LimitParams::for_domain(&d, g, r, s).unwrap();
    let (w, z) = limit_test_pair(&d, &lp);
    for row in &rows {
        let a = schedule_alpha(g, row.p);
        let prm = ProblemParams::new(row.p, r, s, a, row.p - a, g).unwrap();
        let upper = rayleigh_jp(&w, &z, &prm).unwrap().ln_j / row.p;
        assert!(
            row.lambda_root <= upper.exp() * (1.0 + 1e-9),
            "p = {}",
            row.p
        );
    }
}

#[test]
fn cone_pair_solves_limit_system() {
    let d = build_interval(0.0, 2.0, 400).unwrap();
    let lp = LimitParams::for_domain(&d, 0.5, 0.25, 0.75).unwrap();
    let (u, v) = limit_test_pair(&d, &lp);
    let rep = residuals_limit_system(&u, &v, &lp, None).unwrap();
    assert_eq!(rep.lambda_inf, 1.0);
    assert!(rep.max_abs <= 0.1, "{}", rep.max_abs);
}
