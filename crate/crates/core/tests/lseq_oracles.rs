//! Refinement, Born-series and frequency-trend checks of the discrete
//! Lippmann–Schwinger operators.

use navier_core::lseq::{
    born_terms, born_terms_exterior, evaluate_exterior, tail_bound_with, DensityPerturbation,
    LsOperator, MeasurementSet, RestrictedSystem, WaveField, POWER_ITERATIONS,
};
use navier_core::randfield::{SourceModel, SourceRealization, Synthesizer};
use navier_core::stats::{loglog_slope, spearman};
use navier_core::{Bump, ElasticMedium, SourceGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn medium() -> ElasticMedium {
    ElasticMedium::new(2.0, 1.0).unwrap()
}

fn small_m(grid: &SourceGrid) -> DensityPerturbation {
    let b = Bump::new([0.05, -0.03], [0.06, 0.06], 1.0).unwrap();
    DensityPerturbation::from_bump(grid, &b, [20.0, 6.0, 16.0]).unwrap()
}

fn gaussian_source(grid: &SourceGrid) -> SourceRealization {
    let f1 = grid.sample(|p| (-(p[0] * p[0] + p[1] * p[1]) / 0.01).exp());
    let f2 = grid.sample(|p| 0.5 * (-((p[0] - 0.03).powi(2) + p[1] * p[1]) / 0.012).exp());
    SourceRealization {
        f1,
        f2,
        seed: 0,
        index: 0,
    }
}

fn random_source(grid: &SourceGrid, seed: u64) -> SourceRealization {
    let b = Bump::new([0.0, 0.0], [0.17, 0.17], 1.0).unwrap();
    let model = SourceModel::new(2.25, grid.sample(|p| b.eval(p)), grid, seed).unwrap();
    Synthesizer::new(&model, grid).unwrap().realization(0)
}

/// Averages each 2×2 block of a field on a grid with `2n` cells per side.
fn coarsen(u: &[Complex64], n: usize) -> Vec<Complex64> {
    let nf = 2 * n;
    (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            (u[2 * i * nf + 2 * j]
                + u[2 * i * nf + 2 * j + 1]
                + u[(2 * i + 1) * nf + 2 * j]
                + u[(2 * i + 1) * nf + 2 * j + 1])
                * 0.25
        })
        .collect()
}

#[test]
fn h_self_convergence_is_second_order() {
    let med = medium();
    let sizes = [16usize, 32, 64, 128];
    let fields: Vec<WaveField> = sizes
        .iter()
        .map(|&n| {
            let g = SourceGrid::centered(n, 1.0).unwrap();
            LsOperator::new(&g, &med, 4.0)
                .unwrap()
                .apply_h_source(&gaussian_source(&g))
                .unwrap()
        })
        .collect();
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for k in 0..sizes.len() - 1 {
        let n = sizes[k];
        let fine = WaveField {
            u1: coarsen(&fields[k + 1].u1, n),
            u2: coarsen(&fields[k + 1].u2, n),
            omega: 4.0,
        };
        errs.push(fields[k].distance(&fine) / fine.norm());
        hs.push(1.0 / n as f64);
    }
    let order = loglog_slope(&hs, &errs).unwrap();
    assert!(order >= 1.8, "fitted order {order}, errors {errs:?}");
}

#[test]
fn operator_norm_decreases_with_frequency() {
    let g = SourceGrid::centered(128, 1.0).unwrap();
    let m = small_m(&g);
    let norms: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
        .iter()
        .map(|&w| {
            LsOperator::new(&g, &medium(), w)
                .unwrap()
                .norm_k(&m, POWER_ITERATIONS, 9)
                .unwrap()
        })
        .collect();
    for w in norms.windows(2) {
        assert!(w[1] < w[0], "{norms:?}");
    }
}

#[test]
fn direct_solves_meet_residual_tolerance() {
    let g = SourceGrid::centered(64, 1.0).unwrap();
    let m = small_m(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..20 {
        let omega = rng.random_range(5.0..40.0);
        let op = LsOperator::new(&g, &medium(), omega).unwrap();
        let rep = RestrictedSystem::new(&op, &m)
            .unwrap()
            .solve(&random_source(&g, 100 + k))
            .unwrap();
        assert!(
            rep.residual < 1e-10,
            "omega {omega}: residual {:.3e}",
            rep.residual
        );
    }
}

#[test]
fn neumann_bound_at_twenty() {
    let g = SourceGrid::centered(128, 1.0).unwrap();
    let m = small_m(&g);
    let op = LsOperator::new(&g, &medium(), 20.0).unwrap();
    let f = random_source(&g, 3);
    let u = RestrictedSystem::new(&op, &m)
        .unwrap()
        .solve(&f)
        .unwrap()
        .field;
    let t = born_terms(&op, &f, &m, 1).unwrap();
    let tb = tail_bound_with(&op, t[0].norm(), &m).unwrap();
    assert!(tb.norm_k < 1.0);
    let two = t[0].add_scaled(Complex64::new(1.0, 0.0), &t[1]);
    assert!(
        u.distance(&two) <= tb.bound,
        "{} vs {}",
        u.distance(&two),
        tb.bound
    );
}

#[test]
fn born_partial_sums_converge_geometrically() {
    let g = SourceGrid::centered(64, 1.0).unwrap();
    let m = small_m(&g).scaled(1.5);
    let op = LsOperator::new(&g, &medium(), 5.0).unwrap();
    let f = random_source(&g, 4);
    let u = RestrictedSystem::new(&op, &m)
        .unwrap()
        .solve(&f)
        .unwrap()
        .field;
    let nk = op.norm_k(&m, POWER_ITERATIONS, 2).unwrap();
    assert!(nk < 0.5, "||K|| = {nk}");
    let terms = born_terms(&op, &f, &m, 6).unwrap();
    let mut partial = terms[0].clone();
    let mut prev_gap = f64::INFINITY;
    for (k, t) in terms.iter().enumerate().skip(1) {
        partial = partial.add_scaled(Complex64::new(1.0, 0.0), t);
        let gap = u.distance(&partial);
        let majorant = nk.powi(k as i32 + 1) * terms[0].norm() / (1.0 - nk);
        assert!(
            gap <= 2.0 * majorant,
            "N = {k}: {gap:.3e} vs {majorant:.3e}"
        );
        assert!(gap < prev_gap);
        prev_gap = gap;
    }
    let ratios: Vec<f64> = terms
        .windows(2)
        .map(|w| w[1].norm() / w[0].norm())
        .collect();
    for r in &ratios {
        assert!(*r <= nk * (1.0 + 1e-3), "ratio {r} above ||K|| = {nk}");
    }
    let (a, b) = (ratios[4], ratios[5]);
    assert!((b / a - 1.0).abs() < 0.1, "ratios {ratios:?}");
}

#[test]
fn h_decays_with_frequency() {
    let g = SourceGrid::centered(128, 1.0).unwrap();
    let f = gaussian_source(&g);
    let omegas: Vec<f64> = (1..=16).map(|k| 5.0 * k as f64).collect();
    let norms: Vec<f64> = omegas
        .iter()
        .map(|&w| {
            LsOperator::new(&g, &medium(), w)
                .unwrap()
                .apply_h_source(&f)
                .unwrap()
                .norm()
        })
        .collect();
    let rho = spearman(&omegas, &norms);
    assert!(rho < -0.9, "Spearman {rho}");
}

#[test]
fn tail_bound_decays_faster_than_three_halves() {
    let g = SourceGrid::centered(128, 1.0).unwrap();
    let m = small_m(&g);
    let f = random_source(&g, 5);
    let omegas = [10.0, 20.0, 40.0, 80.0];
    let bounds: Vec<f64> = omegas
        .iter()
        .map(|&w| {
            let op = LsOperator::new(&g, &medium(), w).unwrap();
            let u0 = op.apply_h_source(&f).unwrap().norm();
            tail_bound_with(&op, u0, &m).unwrap().bound
        })
        .collect();
    for w in bounds.windows(2) {
        assert!(w[1] < w[0], "{bounds:?}");
    }
    let slope = loglog_slope(&omegas, &bounds).unwrap();
    assert!(slope <= -1.5, "tail decay exponent {slope}");
}

#[test]
fn exterior_field_is_resolution_stable() {
    let omega = 10.0;
    let vals: Vec<WaveField> = [64usize, 128]
        .iter()
        .map(|&n| {
            let g = SourceGrid::centered(n, 1.0).unwrap();
            let m = small_m(&g);
            let f = gaussian_source(&g);
            let op = LsOperator::new(&g, &medium(), omega).unwrap();
            let u = RestrictedSystem::new(&op, &m)
                .unwrap()
                .solve(&f)
                .unwrap()
                .field;
            let pts = MeasurementSet::ring([0.0, 0.0], 1.75, 12, &g).unwrap();
            assert!(pts.points().iter().all(|p| g.distance_to_box(*p) >= 1.0));
            evaluate_exterior(&u, &f, &m, &medium(), omega, &pts, &g).unwrap()
        })
        .collect();
    let rel = vals[0].distance(&vals[1]) / vals[1].norm();
    assert!(rel < 1e-3, "relative change {rel:.3e}");
}

#[test]
fn exterior_born_terms_match_full_field() {
    let g = SourceGrid::centered(64, 1.0).unwrap();
    let m = small_m(&g);
    let f = random_source(&g, 6);
    let op = LsOperator::new(&g, &medium(), 12.0).unwrap();
    let pts = MeasurementSet::ring([0.0, 0.0], 1.0, 16, &g).unwrap();
    let bt = born_terms_exterior(&op, &f, &m, &pts).unwrap();
    let zero_m = DensityPerturbation::zeros(&g);
    let u0g = born_terms(&op, &f, &m, 0).unwrap().remove(0);
    let direct_u0 = evaluate_exterior(&u0g, &f, &zero_m, &medium(), 12.0, &pts, &g).unwrap();
    assert!(bt.u0.distance(&direct_u0) < 1e-12 * direct_u0.norm());
    let u = RestrictedSystem::new(&op, &m)
        .unwrap()
        .solve(&f)
        .unwrap()
        .field;
    let full = evaluate_exterior(&u, &f, &m, &medium(), 12.0, &pts, &g).unwrap();
    let approx = bt.u0.add_scaled(Complex64::new(1.0, 0.0), &bt.u1);
    assert!(full.distance(&approx) < full.distance(&bt.u0));
    assert!(bt.tail_bound >= 0.0);
    let z = born_terms_exterior(&op, &f, &zero_m, &pts).unwrap();
    assert_eq!(z.u1.norm(), 0.0);
}
