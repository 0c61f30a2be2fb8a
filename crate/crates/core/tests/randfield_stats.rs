//! Monte Carlo checks of the synthesized source statistics.

use navier_core::grid::{Bump, SourceGrid};
use navier_core::randfield::{covariance_profile, structure_fit, SourceModel, Synthesizer};
use navier_core::stats::{correlation, excess_kurtosis, skewness, variance};

fn model(n: usize, m: f64, seed: u64) -> (SourceGrid, SourceModel) {
    let g = SourceGrid::centered(n, 1.0).unwrap();
    let b = Bump::new([0.0, 0.0], [0.176, 0.176], 1.0).unwrap();
    let phi = g.sample(|p| b.eval(p));
    let model = SourceModel::new(m, phi, &g, seed).unwrap();
    (g, model)
}

fn bases() -> Vec<(usize, usize)> {
    let c = [50, 54, 58, 62];
    c.iter()
        .flat_map(|&i| c.iter().map(move |&j| (i, j)))
        .collect()
}

fn fitted_exponent(m: f64, seed: u64) -> f64 {
    let (g, model) = model(128, m, seed);
    let synth = Synthesizer::new(&model, &g).unwrap();
    let offsets: Vec<usize> = (2..=16).collect();
    let prof = covariance_profile(&synth, 2000, &bases(), &offsets).unwrap();
    let pts: Vec<(f64, f64)> = prof.iter().map(|p| (p.0, p.1)).collect();
    structure_fit(&pts, m).unwrap().value
}

#[test]
fn covariance_power_law_exponent_m225() {
    let a = fitted_exponent(2.25, 11);
    assert!((a - 0.25).abs() < 0.1, "fitted exponent {a}");
}

#[test]
fn covariance_power_law_exponent_m24() {
    let a = fitted_exponent(2.4, 12);
    assert!((a - 0.4).abs() < 0.1, "fitted exponent {a}");
}

#[test]
fn log_structure_at_order_two() {
    let (g, model) = model(128, 2.0, 5);
    let synth = Synthesizer::new(&model, &g).unwrap();
    let prof = covariance_profile(&synth, 2000, &bases(), &[2, 4, 8, 16]).unwrap();
    // C(δ) − C(2δ) → (ln 2)/(2π) for the kernel of |ξ|^{-2}
    let target = std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI);
    for w in prof.windows(2) {
        let d = w[0].1 - w[1].1;
        assert!(d > 0.0, "difference at δ = {} is {d}", w[0].0);
        assert!(
            (d / target - 1.0).abs() < 0.35,
            "difference {d} vs {target}"
        );
    }
}

fn pairings(n: usize, samples: u64) -> (Vec<f64>, Vec<f64>) {
    let (g, model) = model(n, 2.25, 99);
    let synth = Synthesizer::new(&model, &g).unwrap();
    let psi = g.sample(|p| (-(p[0] * p[0] + (p[1] - 0.03).powi(2)) / 0.01).exp() * (1.0 + p[0]));
    let h2 = g.h() * g.h();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..samples {
        let r = synth.realization(k);
        a.push(r.f1.iter().zip(&psi).map(|(f, p)| f * p).sum::<f64>() * h2);
        b.push(r.f2.iter().zip(&psi).map(|(f, p)| f * p).sum::<f64>() * h2);
    }
    (a, b)
}

#[test]
fn linear_functionals_are_gaussian_and_independent() {
    let (a, b) = pairings(128, 2000);
    assert!(skewness(&a).abs() < 0.15, "skewness {}", skewness(&a));
    assert!(
        excess_kurtosis(&a).abs() < 0.3,
        "kurtosis {}",
        excess_kurtosis(&a)
    );
    assert!(correlation(&a, &b).abs() < 0.1);
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    assert!(mean.abs() < 4.0 * (variance(&a) / a.len() as f64).sqrt());
}

#[test]
fn functional_variance_stable_under_refinement() {
    let n_s = 1000;
    let (a, _) = pairings(64, n_s);
    let (b, _) = pairings(128, n_s);
    let (va, vb) = (variance(&a), variance(&b));
    let se = |v: f64| v * (2.0 / (n_s as f64 - 1.0)).sqrt();
    assert!((va - vb).abs() < 4.0 * se(va).hypot(se(vb)), "{va} vs {vb}");
}

#[test]
fn different_seeds_decorrelate() {
    // same cell, realization 0, seeds s and s + 5000, over 1000 seed pairs
    let (g, m) = model(128, 2.25, 0);
    let cells = [64 * 128 + 64, 60 * 128 + 70];
    for &c in &cells {
        let mut xa = Vec::new();
        let mut xb = Vec::new();
        for s in 0..1000u64 {
            xa.push(
                Synthesizer::new(&m.with_seed(s), &g)
                    .unwrap()
                    .realization(0)
                    .f1[c],
            );
            xb.push(
                Synthesizer::new(&m.with_seed(s + 5000), &g)
                    .unwrap()
                    .realization(0)
                    .f1[c],
            );
        }
        let r = correlation(&xa, &xb);
        assert!(r.abs() < 0.1, "cell {c}: correlation {r}");
    }
    let a = Synthesizer::new(&m, &g).unwrap().realization(0);
    let b = Synthesizer::new(&m.with_seed(1), &g)
        .unwrap()
        .realization(0);
    assert_ne!(a.f1, b.f1);
}
