use surprisal::evt::{
    check_scaled_bound_on, entropy_oracle, gumbel_ks_distance, normal_max_norming,
    simulate_max_distribution, MaxSurprisalStudy, RegimeStudy, TailBound,
};
use surprisal::DistributionModel;

#[test]
fn normal_maximum_surprisal_is_gumbel() {
    let n = 100_000;
    let model = DistributionModel::normal(0.0, 1.0).unwrap();
    // E[S] = (1 + ln 2π)/2 exactly
    let entropy = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    let study = MaxSurprisalStudy::new(model, n, 2000, entropy).unwrap();
    let maxima = simulate_max_distribution(&study, 21);
    let (a_n, b_n) = normal_max_norming(n).unwrap();
    let d = gumbel_ks_distance(&maxima, b_n, a_n);
    assert!(d <= 0.05, "KS distance {d}");
}

#[test]
fn scaled_bounds_hold_for_all_regimes() {
    for n in [1_000, 10_000] {
        for bound in [TailBound::SubGaussian, TailBound::SubExponential, TailBound::Polynomial] {
            let rs = RegimeStudy::with_oracle_draws(bound, n, 1000, 5, 300_000).unwrap();
            let (plain, scaled) = rs.run(6).unwrap();
            for c in plain.iter().chain(&scaled) {
                assert!(c.pass, "{bound:?} n={n}: {c:?}");
                assert!(c.bound >= 0.0);
            }
        }
    }
}

#[test]
fn subexponential_scaled_bound_rejects_a_shrunken_scale() {
    let model = DistributionModel::normal(0.0, 1.0).unwrap();
    let entropy = entropy_oracle(&model, 200_000, 8).unwrap();
    let study = MaxSurprisalStudy::new(model, 1000, 1000, entropy).unwrap().with_b(0.2);
    let maxima = simulate_max_distribution(&study, 9);
    let checks = check_scaled_bound_on(&maxima, &study, TailBound::SubExponential, &[0.5, 1.0]).unwrap();
    assert!(checks.iter().any(|c| !c.pass), "{checks:?}");
}
