//! Property tests for the numerical invariants of each module.

use std::sync::Arc;

use morreylab::cli::{format_sig9, parse_config, region_csv, CSV_HEADER};
use morreylab::grid::{
    dyadic_family, integrate_ball, Ball, BallFamily, Domain, FamilyMode, Integrand, SampledFunction,
};
use morreylab::morrey::{global_integral, morrey_norm, weak_morrey_norm, MorreyParams};
use morreylab::operators::{hilbert, maximal};
use morreylab::sweep::{classify_region, growth_exponent, Operator, SuiteSelection, SweepConfig};
use morreylab::weights::{
    ap_constant_estimate, rh_constant_estimate, rh_measure_ratio_sup, Weight,
};
use proptest::prelude::*;

const CELLS: usize = 32;

fn line() -> Arc<Domain> {
    Arc::new(Domain::uniform(1, 4.0, CELLS).unwrap())
}

fn family(d: &Arc<Domain>, mode: FamilyMode) -> BallFamily {
    dyadic_family(d, d.min_cell_size(), 2.0 * d.half_width(), mode).unwrap()
}

fn sampled(d: &Arc<Domain>, values: Vec<f64>) -> SampledFunction {
    SampledFunction::new(d.clone(), values).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, CELLS)
        .prop_filter("non-zero", |v| v.iter().any(|&x| x != 0.0))
}

fn nonnegative() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, CELLS)
        .prop_filter("non-zero", |v| v.iter().any(|&x| x > 0.0))
}

fn indicator() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY, CELLS)
        .prop_filter("non-empty", |v| v.iter().any(|&b| b))
        .prop_map(|v| v.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
}

fn space() -> impl Strategy<Value = (f64, f64, f64)> {
    (1.0f64..4.0, 0.0f64..0.9, -0.6f64..1.5)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn origin_power_integrals_are_exact(alpha in -0.95f64..2.0, r in 0.01f64..4.0, plane in prop::bool::ANY) {
        let dim = if plane { 2 } else { 1 };
        let d = Arc::new(Domain::uniform(dim, 4.0, if plane { 16 } else { 64 }).unwrap());
        let v = integrate_ball(&d, Integrand::One, &Weight::power(alpha), &Ball::origin(r).unwrap()).unwrap();
        let n = dim as f64;
        let c = if plane { 2.0 * std::f64::consts::PI } else { 2.0 };
        let exact = c * r.powf(alpha + n) / (alpha + n);
        prop_assert!(rel(v, exact) < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn ball_integrals_grow_with_radius(f in nonnegative(), cx in -4.0f64..4.0, r in 0.01f64..3.0, alpha in -0.5f64..1.0) {
        let d = line();
        let g = sampled(&d, f);
        let w = Weight::power(alpha);
        let at = |r: f64| integrate_ball(&d, Integrand::Func(&g), &w, &Ball::new([cx, 0.0], r).unwrap()).unwrap();
        prop_assert!(at(r) <= at(1.5 * r) * (1.0 + 1e-12));
    }

    #[test]
    fn enlarging_the_family_never_lowers_constants(alpha in -0.9f64..0.9, p in 1.5f64..4.0) {
        let d = line();
        let small = dyadic_family(&d, 0.25, 2.0, FamilyMode::Full).unwrap();
        let large = dyadic_family(&d, 0.25, 8.0, FamilyMode::Full).unwrap();
        let w = Weight::power(alpha);
        let a = ap_constant_estimate(&w, p, &small).unwrap().constant;
        let b = ap_constant_estimate(&w, p, &large).unwrap().constant;
        prop_assert!(a <= b, "{a} > {b}");
    }

    #[test]
    fn ap_constants_ignore_scaling(alpha in -0.9f64..0.9, p in 1.5f64..4.0, k in -6i32..6, c in 0.01f64..100.0) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let w = Weight::power(alpha);
        let base = ap_constant_estimate(&w, p, &fam).unwrap().constant;
        let two = ap_constant_estimate(&w.clone().scaled(2f64.powi(k)), p, &fam).unwrap().constant;
        let any = ap_constant_estimate(&w.scaled(c), p, &fam).unwrap().constant;
        prop_assert!(rel(base, two) < 1e-14, "{base} vs {two}");
        prop_assert!(rel(base, any) < 1e-12, "{base} vs {any}");
    }

    #[test]
    fn rh_measure_ratio_is_controlled(alpha in -0.45f64..2.0, sigma in 1.1f64..2.0) {
        prop_assume!(sigma * alpha > -1.0);
        let d = Arc::new(Domain::uniform(1, 4.0, 16).unwrap());
        let fam = dyadic_family(&d, 0.125, 2.0, FamilyMode::Full).unwrap();
        let w = Weight::power(alpha);
        let c = rh_constant_estimate(&w, sigma, &fam).unwrap().constant;
        let sup = rh_measure_ratio_sup(&w, sigma, &fam).unwrap();
        prop_assert!(sup <= 4.0 * c, "{sup} > 4 * {c}");
    }

    #[test]
    fn maximal_is_sublinear_and_homogeneous(f in values(), g in values(), k in -4i32..4) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let (f, g) = (sampled(&d, f), sampled(&d, g));
        let mf = maximal(&f, &fam).unwrap();
        let mg = maximal(&g, &fam).unwrap();
        let msum = maximal(&f.add(&g).unwrap(), &fam).unwrap();
        for k in 0..d.cell_count() {
            prop_assert!(msum.value(k) <= (mf.value(k) + mg.value(k)) * (1.0 + 1e-12));
        }
        let c = -(2f64.powi(k));
        let mc = maximal(&f.scale(c).unwrap(), &fam).unwrap();
        for i in 0..d.cell_count() {
            prop_assert_eq!(mc.value(i), c.abs() * mf.value(i));
        }
    }

    #[test]
    fn maximal_is_monotone(f in nonnegative(), extra in nonnegative()) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let f = sampled(&d, f);
        let g = f.add(&sampled(&d, extra)).unwrap();
        let (mf, mg) = (maximal(&f, &fam).unwrap(), maximal(&g, &fam).unwrap());
        for k in 0..d.cell_count() {
            prop_assert!(mf.value(k) <= mg.value(k) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn hilbert_maps_even_to_odd(half in prop::collection::vec(-3.0f64..3.0, CELLS / 2)) {
        let d = line();
        let mut v: Vec<f64> = half.iter().rev().cloned().collect();
        v.extend(half.iter().cloned());
        let h = hilbert(&sampled(&d, v)).unwrap();
        let scale = h.max_abs().max(1.0);
        for k in 0..CELLS / 2 {
            let sum = h.value(k) + h.value(CELLS - 1 - k);
            prop_assert!(sum.abs() <= 1e-12 * scale, "cell {k}: {sum}");
        }
    }

    #[test]
    fn norms_are_homogeneous(f in values(), (p, lambda, beta) in space(), k in -5i32..5) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let params = MorreyParams::power(p, lambda, beta, 1).unwrap();
        let f = sampled(&d, f);
        let c = -(2f64.powi(k));
        let cf = f.scale(c).unwrap();
        prop_assert_eq!(morrey_norm(&cf, &params, &fam).unwrap().value, c.abs() * morrey_norm(&f, &params, &fam).unwrap().value);
        prop_assert_eq!(weak_morrey_norm(&cf, &params, &fam).unwrap().value, c.abs() * weak_morrey_norm(&f, &params, &fam).unwrap().value);
    }

    #[test]
    fn weak_never_exceeds_strong(f in values(), (p, lambda, beta) in space()) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let params = MorreyParams::power(p, lambda, beta, 1).unwrap();
        let f = sampled(&d, f);
        let s = morrey_norm(&f, &params, &fam).unwrap().value;
        let w = weak_morrey_norm(&f, &params, &fam).unwrap().value;
        prop_assert!(w <= s * (1.0 + 1e-12), "{w} > {s}");
    }

    #[test]
    fn indicators_have_equal_weak_and_strong_norms(f in indicator(), (p, lambda, beta) in space()) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let params = MorreyParams::power(p, lambda, beta, 1).unwrap();
        let f = sampled(&d, f);
        let s = morrey_norm(&f, &params, &fam).unwrap().value;
        let w = weak_morrey_norm(&f, &params, &fam).unwrap().value;
        prop_assert!(rel(s, w) < 1e-12, "{s} vs {w}");
    }

    #[test]
    fn reduced_family_loses_at_most_a_fixed_factor(f in values(), (p, lambda, beta) in space()) {
        let d = line();
        let full = family(&d, FamilyMode::Full);
        let reduced = full.with_mode(FamilyMode::Reduced).unwrap();
        let params = MorreyParams::power(p, lambda, beta, 1).unwrap();
        let f = sampled(&d, f);
        let a = morrey_norm(&f, &params, &full).unwrap().value;
        let b = morrey_norm(&f, &params, &reduced).unwrap().value;
        prop_assert!(b <= a);
        prop_assert!(a <= 5f64.powf((lambda + 1.0) / p) * b, "{a} vs {b}");
    }

    #[test]
    fn lambda_zero_is_the_weighted_lebesgue_norm(f in values(), p in 1.0f64..4.0, beta in -0.6f64..1.5) {
        let d = line();
        let fam = family(&d, FamilyMode::Full);
        let params = MorreyParams::power(p, 0.0, beta, 1).unwrap();
        let f = sampled(&d, f);
        let norm = morrey_norm(&f, &params, &fam).unwrap().value;
        let lp = global_integral(&f, p, &Weight::power(beta)).powf(1.0 / p);
        prop_assert!(rel(norm, lp) < 1e-10, "{norm} vs {lp}");
    }

    #[test]
    fn power_laws_give_their_exponent(g in 0.0f64..2.0, c in 0.1f64..10.0) {
        let levels: Vec<(f64, f64)> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
            .iter()
            .map(|&h: &f64| (h, c * h.powf(-g)))
            .collect();
        prop_assert!((growth_exponent(&levels).unwrap() - g).abs() < 1e-9);
    }

    #[test]
    fn sig9_round_trips(x in prop::num::f64::NORMAL) {
        let s = format_sig9(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!(rel(x, back) <= 5e-9, "{x} -> {s}");
        prop_assert_eq!(format_sig9(back), s);
    }
}

#[test]
fn sweep_csv_rows_follow_the_schema_and_repeat() {
    let config = parse_config(
        "operator = H\np = 2\nlambda = 0.5\nbeta = 0, 1.8\nresolutions = 64, 128, 256\nsuite = targeted\n",
    )
    .unwrap();
    assert_eq!(config.operator, Operator::Hilbert);
    assert_eq!(config.suite, SuiteSelection::Targeted);
    let a = region_csv(&classify_region(&config).unwrap());
    let b = region_csv(&classify_region(&config).unwrap());
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    for (row, beta) in lines.zip([0.0, 1.8]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 9, "{row}");
        assert_eq!(fields[0].parse::<f64>().unwrap(), 2.0);
        assert_eq!(fields[2].parse::<f64>().unwrap(), beta);
        assert!(["bounded", "unbounded", "inconclusive"].contains(&fields[3]));
        for i in [4, 5, 7, 8] {
            fields[i].parse::<f64>().unwrap();
        }
    }
}

#[test]
fn right_of_the_range_stays_unbounded() {
    let config = SweepConfig {
        p_grid: vec![2.0],
        lambda_grid: vec![0.5],
        beta_grid: vec![1.8, 2.2, 2.6],
        resolutions: vec![128, 256, 512],
        ..SweepConfig::default()
    };
    let map = classify_region(&config).unwrap();
    for c in &map.cells {
        assert_eq!(c.classification.as_str(), "unbounded", "beta {}", c.beta);
    }
}
