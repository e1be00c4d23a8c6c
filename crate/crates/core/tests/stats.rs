use fsep_core::dynamics::{step_fssep, step_ssm};
use fsep_core::gibbs::sample_even_gibbs;
use fsep_core::lattice::{ExclusionConfig, LeftRight, StackConfig};
use fsep_core::rng::stream;
use fsep_core::stats::{
    chi_square_homogeneity, halfdensity_convergence, halfdensity_from, quench_lowdensity, random_exclusion,
    ratio_and_se, renewal_independence_test, stationarity_test, two_point_correlation, CylinderTable,
};
use fsep_core::substitution::phi_stack;
use fsep_core::Error;
use rand::Rng;
use rayon::prelude::*;

fn ex(s: &str) -> ExclusionConfig {
    ExclusionConfig::from_bit_str(s).unwrap()
}

#[test]
fn frozen_point_mass_is_exactly_stationary() {
    let frozen = ex("1001010001000101");
    let c = stationarity_test(|_| Ok(frozen.clone()), |x, ctx| Ok(step_fssep(x, ctx)), 3, 10_000, 1, 1).unwrap();
    assert_eq!(c.tv, 0.0);
    assert!(c.p_value > 0.01);
}

#[test]
fn bernoulli_start_is_not_stationary() {
    let c = stationarity_test(
        |rng| {
            let bits: Vec<bool> = (0..300).map(|_| rng.random_bool(0.7)).collect();
            ExclusionConfig::from_bits(bits)
        },
        |x, ctx| Ok(step_fssep(x, ctx)),
        3,
        200_000,
        4,
        2,
    )
    .unwrap();
    assert!(c.p_value < 0.001, "p {}", c.p_value);
}

#[test]
fn even_gibbs_is_stationary() {
    let c = stationarity_test(|rng| sample_even_gibbs(0.5, 200, rng), step_ssm, 3, 100_000, 4, 3)
        .unwrap();
    assert!(c.p_value > 0.01, "p {}", c.p_value);
    assert!(stationarity_test(|rng| sample_even_gibbs(0.5, 200, rng), step_ssm, 3, 9_999, 4, 3)
        .is_err());
}

#[test]
fn image_of_unit_stacks_has_two_equal_windows() {
    let mut t = CylinderTable::new(2).unwrap();
    let mut rng = stream(1, "stats-mu1", 0);
    let x = phi_stack(&StackConfig::new(vec![1; 7]).unwrap()).unwrap();
    for _ in 0..100 {
        t.add_ring(&x.rotate(rng.random_range(0..14usize) as isize)).unwrap();
    }
    assert_eq!(t.probabilities().into_iter().collect::<Vec<_>>(), vec![(vec![0, 1], 0.5), (vec![1, 0], 0.5)]);
}

#[test]
fn homogeneity_detects_different_laws() {
    let mut a = CylinderTable::new(1).unwrap();
    let mut b = CylinderTable::new(1).unwrap();
    let mut rng = stream(2, "stats-homog", 0);
    for _ in 0..2_000 {
        a.add_ring(&ExclusionConfig::from_bits((0..10).map(|_| rng.random_bool(0.5))).unwrap()).unwrap();
        b.add_ring(&ExclusionConfig::from_bits((0..10).map(|_| rng.random_bool(0.55))).unwrap()).unwrap();
    }
    let c = chi_square_homogeneity(&a, &b).unwrap();
    assert!(c.p_value < 1e-6);
    assert!((c.tv - 0.05).abs() < 0.01);
}

fn quench_runs(rho: f64, seeds: u64) -> Vec<fsep_core::stats::QuenchResult> {
    (0..seeds)
        .into_par_iter()
        .map(|s| quench_lowdensity(rho, 100_000, 100 + s, 10_000_000).unwrap())
        .collect()
}

#[test]
fn quench_freezes_and_keeps_markers() {
    for rho in [0.2, 0.3] {
        let runs = quench_runs(rho, 40);
        for r in &runs {
            assert!(r.frozen && r.final_config.is_frozen());
            assert!(r.markers_never_created);
            assert_eq!(r.final_config.particles(), r.initial.particles());
            for &m in &r.record.markers {
                assert!(!r.final_config.get(m) && !r.final_config.get(m + 99_999) && !r.final_config.get(m + 99_998));
            }
            // Frozen gaps: 1, or at least 4 with no 11 inside.
            for (g, s) in r.record.gaps.iter().zip(&r.record.interiors) {
                assert!(*g == 1 || *g >= 4, "gap {g}");
                assert!(!s.contains("11") && !s[..s.len() - 1].contains("000"));
            }
            let bound = (1.0 - 2.0 * rho) / (1.0 - rho);
            assert!(r.q_hat >= bound);
        }
        // A gap of one follows a marker with probability 1 - ρ.
        let hits: Vec<f64> = runs.iter().map(|r| r.record.gaps.iter().filter(|&&g| g == 1).count() as f64).collect();
        let trials: Vec<f64> = runs.iter().map(|r| r.record.gaps.len() as f64).collect();
        let (p, se) = ratio_and_se(&hits, &trials);
        assert!((p - (1.0 - rho)).abs() < 3.0 * se, "rho {rho}: {p} (se {se})");
    }
    assert!(quench_lowdensity(0.5, 100, 1, 10).is_err());
}

#[test]
fn quench_gaps_look_independent() {
    let runs = quench_runs(0.2, 40);
    let gaps: Vec<Vec<usize>> = runs.iter().map(|r| r.record.gaps.clone()).collect();
    let t = renewal_independence_test(&gaps).unwrap();
    assert!(t.p_value > 0.01, "p {}", t.p_value);
}

#[test]
fn independence_test_controls() {
    let mut rng = stream(3, "stats-gaps", 0);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| if rng.random_bool(0.7) { 1 } else { 4 + 2 * rng.random_range(0..4) };
    let iid: Vec<Vec<usize>> = (0..10).map(|_| (0..5_000).map(|_| draw(&mut rng)).collect()).collect();
    let t = renewal_independence_test(&iid).unwrap();
    assert!(t.p_value > 0.01, "p {}", t.p_value);

    // A gap of 1 is usually followed by a long gap.
    let correlated: Vec<Vec<usize>> = (0..10)
        .map(|_| {
            let mut g = vec![1usize];
            for _ in 1..5_000 {
                let prev = *g.last().unwrap();
                let next = if prev == 1 && rng.random_bool(0.6) { 8 } else { draw(&mut rng) };
                g.push(next);
            }
            g
        })
        .collect();
    let t = renewal_independence_test(&correlated).unwrap();
    assert!(t.p_value < 0.001, "p {}", t.p_value);
    assert!(matches!(renewal_independence_test(&[vec![1; 100]]), Err(Error::InsufficientData(_))));
}

#[test]
fn correlation_fit_controls() {
    let gibbs: Vec<StackConfig> = (0..4_000u64)
        .into_par_iter()
        .map(|i| sample_even_gibbs(0.5, 256, &mut stream(4, "stats-corr", i)).unwrap())
        .collect();
    let fit = two_point_correlation(&gibbs, 8).unwrap();
    assert!((fit.ratio - 1.0 / 3.0).abs() < 0.1 / 3.0, "{}", fit.ratio);
    assert!(fit.covariance[0] < 0.0 && fit.covariance[1] > 0.0);

    let mut rng = stream(4, "stats-bernoulli", 0);
    let iid: Vec<StackConfig> = (0..400)
        .map(|_| StackConfig::new((0..256).map(|_| if rng.random_bool(0.25) { 0 } else { 2 }).collect()).unwrap())
        .collect();
    let fit = two_point_correlation(&iid, 8).unwrap();
    assert!(fit.ratio < 0.1, "{}", fit.ratio);

    let mut rng = stream(4, "stats-alt", 0);
    let alternating: Vec<StackConfig> = (0..40).map(|_| sample_even_gibbs(0.0, 64, &mut rng).unwrap()).collect();
    assert!(matches!(two_point_correlation(&alternating, 8), Err(Error::FitFailure(_))));
}

#[test]
fn halfdensity_examples() {
    let r = halfdensity_from(ex("11001100"), 1, 10, 100).unwrap();
    assert_eq!((r.absorbed_at, r.class), (0, LeftRight::Both));
    assert!(r.translation_ok);
    assert!(matches!(halfdensity_from(ex("1110"), 1, 10, 10), Err(Error::Unbalanced { .. })));

    // R | 00 | L | 11 on 16 sites: the shorter of the R and L stretches
    // disappears whatever the coins.
    for a in [1usize, 2, 4, 5] {
        let b = 6 - a;
        let start = ex(&format!("{}00{}11", "01".repeat(a), "10".repeat(b)));
        let expected = if a > b { LeftRight::Right } else { LeftRight::Left };
        for seed in 0..50 {
            let r = halfdensity_from(start.clone(), seed, 100_000, 100).unwrap();
            assert_eq!(r.class, expected, "{start} seed {seed}");
            assert!(r.translation_ok);
        }
    }
}

#[test]
fn random_balanced_rings_absorb() {
    for seed in 0..20 {
        let r = halfdensity_convergence(200, seed, 1_000_000, 100).unwrap();
        assert!(r.translation_ok && r.class != LeftRight::Neither);
    }
    assert!(halfdensity_convergence(201, 0, 10, 10).is_err());
    let x = random_exclusion(100, 0.5, &mut stream(5, "stats-bal", 0)).unwrap();
    assert_eq!(x.particles(), 50);
    assert!(matches!(halfdensity_from(ex("11100010"), 0, 0, 0), Err(Error::StepLimit(0))));
}
