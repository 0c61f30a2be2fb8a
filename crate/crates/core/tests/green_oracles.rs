//! Independent checks of the Green tensor: the Navier residual by finite
//! differences, the Fourier symbol by a tapered lattice sum, and the decay
//! of the leading-order truncation error.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use navier_core::green::{green_symbol, green_tensor, green_tensor_leading, self_cell_integral};
use navier_core::stats::loglog_slope;
use navier_core::ElasticMedium;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn g(x: [f64; 2], med: &ElasticMedium, omega: f64) -> Matrix2<Complex64> {
    green_tensor(x, [0.0, 0.0], med, omega).unwrap().value
}

/// `μΔG + (λ+μ)∇∇·G + ω²G` at `x` by central differences with step `d`.
fn navier_residual(x: [f64; 2], d: f64, med: &ElasticMedium, omega: f64) -> Matrix2<Complex64> {
    let at = |a: f64, b: f64| g([x[0] + a * d, x[1] + b * d], med, omega);
    let c = at(0.0, 0.0);
    let (e, w, n, s) = (at(1.0, 0.0), at(-1.0, 0.0), at(0.0, 1.0), at(0.0, -1.0));
    let re = |v: f64| Complex64::new(v, 0.0);
    let d2 = d * d;
    let g11 = (e + w - c * re(2.0)) * re(1.0 / d2);
    let g22 = (n + s - c * re(2.0)) * re(1.0 / d2);
    let g12 = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) * re(0.25 / d2);
    let mut out = (g11 + g22) * re(med.mu()) + c * re(omega * omega);
    // (∇∇·G)_ij = Σ_k ∂_i ∂_k G_kj
    for j in 0..2 {
        let div1 = g11[(0, j)] + g12[(1, j)];
        let div2 = g12[(0, j)] + g22[(1, j)];
        out[(0, j)] += div1 * (med.lambda() + med.mu());
        out[(1, j)] += div2 * (med.lambda() + med.mu());
    }
    out
}

#[test]
fn finite_difference_navier_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let med =
            ElasticMedium::new(rng.random_range(0.5..4.0), rng.random_range(0.5..2.0)).unwrap();
        let omega = rng.random_range(1.0..20.0);
        let r = rng.random_range(0.5..3.0);
        let t = rng.random_range(0.0..2.0 * PI);
        let x = [r * t.cos(), r * t.sin()];
        let d = 1e-3 * med.shear_wavelength(omega).unwrap();
        let res = navier_residual(x, d, &med, omega);
        let scale = g(x, &med, omega).norm() * omega * omega;
        let rel = res.norm() / scale;
        assert!(
            rel < 1e-4,
            "omega {omega}, r {r}: relative residual {rel:.3e}"
        );
    }
}

#[test]
fn symbol_matches_tapered_lattice_sum() {
    let med = ElasticMedium::new(2.0, 1.0).unwrap();
    let omega = 2.0;
    let (h, half, taper) = (0.1, 1024usize, 30.0);
    let h2 = h * h;
    // quadrant values; G11, G22 even in each coordinate, G12 odd
    let mut quad = vec![[Complex64::new(0.0, 0.0); 3]; half * half];
    for i in 0..half {
        for j in 0..half {
            let w = if i == 0 && j == 0 {
                self_cell_integral(h, &med, omega).unwrap()
            } else {
                let (x1, x2) = (j as f64 * h, i as f64 * h);
                let damp = (-(x1 * x1 + x2 * x2) / (taper * taper)).exp();
                let e = green_tensor([x1, x2], [0.0, 0.0], &med, omega)
                    .unwrap()
                    .entries();
                e.map(|z| z * (h2 * damp))
            };
            quad[i * half + j] = w;
        }
    }
    let xis: Vec<[f64; 2]> = [0.03, 0.08, 0.45, 0.6, 0.9, 0.03, 0.08, 0.45, 0.6, 0.9]
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let t = 0.37 + 1.13 * k as f64;
            [q * t.cos(), q * t.sin()]
        })
        .collect();
    for xi in xis {
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for i in 0..half {
            for j in 0..half {
                let w = quad[i * half + j];
                let (x1, x2) = (j as f64 * h, i as f64 * h);
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    if (i == 0 && si < 0.0) || (j == 0 && sj < 0.0) {
                        continue;
                    }
                    let ph =
                        Complex64::from_polar(1.0, -2.0 * PI * (sj * x1 * xi[0] + si * x2 * xi[1]));
                    acc[0] += w[0] * ph;
                    acc[1] += w[1] * (si * sj) * ph;
                    acc[2] += w[2] * ph;
                }
            }
        }
        let exact = green_symbol(xi, &med, omega).unwrap();
        let num = Matrix2::new(acc[0], acc[1], acc[1], acc[2]);
        let err = (num - exact.map(|v| Complex64::new(v, 0.0))).norm() / exact.norm();
        assert!(err < 5e-2, "xi {xi:?}: relative error {err:.3e}");
    }
}

#[test]
fn leading_order_truncation_decays() {
    let med = ElasticMedium::new(2.0, 1.0).unwrap();
    let x = [0.6, 0.8];
    let omegas: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powf(k as f64 * 0.5)).collect();
    for (a, b) in [(0, 0), (0, 1), (1, 1)] {
        let errs: Vec<f64> = omegas
            .iter()
            .map(|&w| {
                let d = green_tensor(x, [0.0, 0.0], &med, w).unwrap().entry(a, b)
                    - green_tensor_leading(x, [0.0, 0.0], &med, w)
                        .unwrap()
                        .entry(a, b);
                d.norm()
            })
            .collect();
        let slope = loglog_slope(&omegas, &errs).unwrap();
        assert!(slope <= -1.4, "entry ({a},{b}): slope {slope}");
    }
}

#[test]
fn symbol_is_symmetric_and_decays() {
    let med = ElasticMedium::new(2.0, 1.0).unwrap();
    let s = green_symbol([3.0, -4.0], &med, 1.0).unwrap();
    assert_eq!(s[(0, 1)], s[(1, 0)]);
    let v = Vector2::new(3.0, -4.0);
    // far from the circles the symbol behaves like (4π²)^{-1}[|ξ|^{-2}/μ − (λ+μ)ξξᵀ/(μ(λ+2μ)|ξ|⁴)]
    let q = v.norm_squared();
    let approx: Matrix2<f64> =
        (Matrix2::identity() / q - v * v.transpose() * (3.0 / (4.0 * q * q))) / (4.0 * PI * PI);
    assert!((s - approx).norm() / approx.norm() < 1e-2);
}
