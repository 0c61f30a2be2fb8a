//! Gaussian random sources `f = (f1, f2)` whose covariance has principal
//! symbol `φ(x)|ξ|^{-m}`.
//!
//! Each component is `√φ · Λ^{-m/2} W` where `W` is grid white noise of
//! per-cell variance `h^{-2}` and `Λ^{-m/2}` is the periodic Fourier
//! multiplier `|ξ|^{-m/2}` (angular wavenumbers, mean mode removed).
//!
//! Random numbers come from ChaCha20 seeded by `seed_from_u64(seed)`;
//! realization `k` draws component `j ∈ {0, 1}` from stream `2k + j`, so any
//! realization can be regenerated on its own, in any order or thread.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Error, Result};
use crate::fft::{signed_index, Fft2};
use crate::grid::{check_collar, support_diameter, SourceGrid};

/// Admissible orders are `MIN_ORDER <= m < MAX_ORDER`.
pub const MIN_ORDER: f64 = 2.0;
pub const MAX_ORDER: f64 = 2.5;

/// Zero cells required between `supp φ` and the box edge.
pub const COLLAR_CELLS: usize = 2;

pub fn check_order(m: f64) -> Result<()> {
    if (MIN_ORDER..MAX_ORDER).contains(&m) {
        Ok(())
    } else {
        config(format!("order m = {m} outside the valid range [2, 5/2)"))
    }
}

/// Order, strength samples and seed of a source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    m: f64,
    phi: Vec<f64>,
    seed: u64,
}

impl SourceModel {
    pub fn new(m: f64, phi: Vec<f64>, grid: &SourceGrid, seed: u64) -> Result<Self> {
        check_order(m)?;
        if phi.len() != grid.len() {
            return Err(Error::Input(format!(
                "phi has {} samples, grid has {}",
                phi.len(),
                grid.len()
            )));
        }
        if let Some(bad) = phi.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return config(format!("phi must be finite and nonnegative, found {bad}"));
        }
        check_collar(&phi, grid, COLLAR_CELLS, "phi")?;
        let diam = support_diameter(&phi, grid);
        if grid.side() < 2.0 * diam {
            return config(format!(
                "box side {} is less than twice the diameter {diam:.4} of supp phi",
                grid.side()
            ));
        }
        Ok(Self { m, phi, seed })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// One sampled source on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRealization {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl SourceRealization {
    pub fn zeros(len: usize) -> Self {
        Self {
            f1: vec![0.0; len],
            f2: vec![0.0; len],
            seed: 0,
            index: 0,
        }
    }
}

/// `|k|^{-m}` on the DFT wavenumbers of the grid (angular, zero at `k = 0`), row-major.
///
/// The stationary part of the covariance is the circulant matrix with these
/// eigenvalues, scaled by the white-noise variance `h^{-2}`.
pub fn covariance_spectrum(m: f64, grid: &SourceGrid) -> Vec<f64> {
    let n = grid.n();
    let dk = 2.0 * PI / grid.side();
    let mut out = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            if p == 0 && q == 0 {
                continue;
            }
            let k = dk * signed_index(p, n).hypot(signed_index(q, n));
            out[p * n + q] = k.powf(-m);
        }
    }
    out
}

/// Precomputed multiplier and `√φ` for repeated synthesis.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    grid: SourceGrid,
    seed: u64,
    sqrt_phi: Vec<f64>,
    multiplier: Vec<f64>,
    fft: Fft2,
}

impl Synthesizer {
    pub fn new(model: &SourceModel, grid: &SourceGrid) -> Result<Self> {
        if model.phi.len() != grid.len() {
            return Err(Error::Input("model and grid sizes differ".into()));
        }
        let n = grid.n();
        let norm = 1.0 / (n * n) as f64;
        let multiplier = covariance_spectrum(model.m, grid)
            .iter()
            .map(|s| s.sqrt() * norm)
            .collect();
        Ok(Self {
            grid: *grid,
            seed: model.seed,
            sqrt_phi: model.phi.iter().map(|v| v.sqrt()).collect(),
            multiplier,
            fft: Fft2::new(n),
        })
    }

    pub fn grid(&self) -> &SourceGrid {
        &self.grid
    }

    pub fn sqrt_phi(&self) -> &[f64] {
        &self.sqrt_phi
    }

    /// Realization number `index`.
    pub fn realization(&self, index: u64) -> SourceRealization {
        let len = self.grid.len();
        let sigma = 1.0 / self.grid.h();
        let mut r1 = ChaCha20Rng::seed_from_u64(self.seed);
        r1.set_stream(2 * index);
        let mut r2 = ChaCha20Rng::seed_from_u64(self.seed);
        r2.set_stream(2 * index + 1);
        // both components in one complex transform: the multiplier is real
        // and even, so real and imaginary parts never mix
        let mut buf: Vec<Complex64> = (0..len)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut r1);
                Complex64::new(a, 0.0)
            })
            .collect();
        for z in buf.iter_mut() {
            let b: f64 = StandardNormal.sample(&mut r2);
            z.re *= sigma;
            z.im = b * sigma;
        }
        self.fft.forward(&mut buf);
        for (z, w) in buf.iter_mut().zip(&self.multiplier) {
            *z *= *w;
        }
        self.fft.inverse(&mut buf);
        let f1 = buf
            .iter()
            .zip(&self.sqrt_phi)
            .map(|(z, s)| z.re * s)
            .collect();
        let f2 = buf
            .iter()
            .zip(&self.sqrt_phi)
            .map(|(z, s)| z.im * s)
            .collect();
        SourceRealization {
            f1,
            f2,
            seed: self.seed,
            index,
        }
    }
}

/// Realization 0 of `model` on `grid`.
pub fn synthesize(model: &SourceModel, grid: &SourceGrid) -> Result<SourceRealization> {
    Ok(Synthesizer::new(model, grid)?.realization(0))
}

/// A Monte Carlo covariance estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovEstimate {
    pub offset: (isize, isize),
    pub value: f64,
    pub stderr: f64,
}

/// Sample covariance of `f1(z)` and `f1(z + offset)` over realizations `0..n_samples`.
pub fn empirical_covariance(
    model: &SourceModel,
    grid: &SourceGrid,
    n_samples: usize,
    z: (usize, usize),
    offsets: &[(isize, isize)],
) -> Result<Vec<CovEstimate>> {
    if n_samples < 100 {
        return Err(Error::Input(format!(
            "need at least 100 samples, got {n_samples}"
        )));
    }
    let n = grid.n() as isize;
    let idx = |i: isize, j: isize| -> Result<usize> {
        if (0..n).contains(&i) && (0..n).contains(&j) {
            Ok((i * n + j) as usize)
        } else {
            Err(Error::Input(format!("grid index ({i}, {j}) out of range")))
        }
    };
    let base = idx(z.0 as isize, z.1 as isize)?;
    let others: Vec<usize> = offsets
        .iter()
        .map(|&(di, dj)| idx(z.0 as isize + di, z.1 as isize + dj))
        .collect::<Result<_>>()?;
    let synth = Synthesizer::new(model, grid)?;
    let mut a = Vec::with_capacity(n_samples);
    let mut b = vec![Vec::with_capacity(n_samples); offsets.len()];
    for k in 0..n_samples as u64 {
        let f = synth.realization(k).f1;
        a.push(f[base]);
        for (col, &o) in b.iter_mut().zip(&others) {
            col.push(f[o]);
        }
    }
    Ok(offsets
        .iter()
        .zip(&b)
        .map(|(&offset, col)| {
            let (value, stderr) = sample_cov(&a, col);
            CovEstimate {
                offset,
                value,
                stderr,
            }
        })
        .collect())
}

fn sample_cov(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let c = prods.iter().sum::<f64>() / (n - 1.0);
    let var = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (n - 1.0);
    (c, (var / n).sqrt())
}

/// Profile of the normalised covariance `C(z, z+δ)/√(φ(z)φ(z+δ))` against `|δ|`.
///
/// Averages over the given base cells, over axis-aligned shifts in both
/// directions and over both source components, which share one law.
/// Returns `(distance, value, stderr)` per entry of `offsets` (in cells).
pub fn covariance_profile(
    synth: &Synthesizer,
    n_samples: usize,
    bases: &[(usize, usize)],
    offsets: &[usize],
) -> Result<Vec<(f64, f64, f64)>> {
    let n = synth.grid.n();
    let s = &synth.sqrt_phi;
    let mut pairs: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(offsets.len());
    for &o in offsets {
        let mut v = Vec::new();
        for &(i, j) in bases {
            for (ti, tj) in [(i, j + o), (i + o, j)] {
                if ti >= n || tj >= n {
                    return Err(Error::Input(format!(
                        "offset {o} leaves the grid from ({i}, {j})"
                    )));
                }
                let (ka, kb) = (i * n + j, ti * n + tj);
                let w = s[ka] * s[kb];
                if w <= 0.0 {
                    return Err(Error::Input(format!(
                        "base ({i}, {j}) with offset {o} leaves supp phi"
                    )));
                }
                v.push((ka, kb, 1.0 / w));
            }
        }
        pairs.push(v);
    }
    let mut per_sample = vec![Vec::with_capacity(2 * n_samples); offsets.len()];
    for k in 0..n_samples as u64 {
        let r = synth.realization(k);
        for f in [&r.f1, &r.f2] {
            for (col, pv) in per_sample.iter_mut().zip(&pairs) {
                let acc: f64 = pv.iter().map(|&(a, b, w)| f[a] * f[b] * w).sum();
                col.push(acc / pv.len() as f64);
            }
        }
    }
    let h = synth.grid.h();
    Ok(offsets
        .iter()
        .zip(&per_sample)
        .map(|(&o, col)| {
            let m = col.len() as f64;
            let mean = col.iter().sum::<f64>() / m;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (o as f64 * h, mean, (var / m).sqrt())
        })
        .collect())
}

/// Result of [`structure_fit`]: the fitted exponent (or log coefficient for `m = 2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureFit {
    pub value: f64,
    pub stderr: f64,
}

/// Fits `A r^α + B` (for `m > 2`, returning `α`) or `A ln r + B` (for `m = 2`, returning `A`).
pub fn structure_fit(profile: &[(f64, f64)], m: f64) -> Result<StructureFit> {
    check_order(m).map_err(|e| Error::Fit(e.to_string()))?;
    let mut r: Vec<f64> = profile.iter().map(|p| p.0).collect();
    if r.iter().any(|v| !(*v > 0.0 && v.is_finite())) || profile.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Fit(
            "distances must be positive and values finite".into(),
        ));
    }
    r.sort_by(f64::total_cmp);
    r.dedup();
    if r.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 distinct distances, got {}",
            r.len()
        )));
    }
    let ys: Vec<f64> = profile.iter().map(|p| p.1).collect();
    let ymean = ys.iter().sum::<f64>() / ys.len() as f64;
    let spread = ys.iter().map(|y| (y - ymean).abs()).fold(0.0, f64::max);
    if spread <= 1e-14 * ymean.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Fit("profile is constant".into()));
    }
    if m == MIN_ORDER {
        let x: Vec<f64> = profile.iter().map(|p| p.0.ln()).collect();
        let f = crate::stats::line_fit(&x, &ys)?;
        return Ok(StructureFit {
            value: f.slope,
            stderr: f.slope_stderr,
        });
    }
    let rss = |alpha: f64| {
        linear_part(profile, alpha)
            .map(|(_, _, s)| s)
            .unwrap_or(f64::INFINITY)
    };
    let (lo, hi) = (1e-3, 2.0);
    let steps = 400;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| rss(grid[a]).total_cmp(&rss(grid[b])))
        .expect("nonempty");
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (rss(c), rss(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rss(d);
        }
    }
    let alpha = 0.5 * (a + b);
    let (amp, _, s) = linear_part(profile, alpha)
        .ok_or_else(|| Error::Fit("singular normal equations".into()))?;
    // Gauss–Newton covariance of (α, A, B)
    let mut jtj = Matrix3::zeros();
    for &(x, _) in profile {
        let xa = x.powf(alpha);
        let row = Vector3::new(amp * xa * x.ln(), xa, 1.0);
        jtj += row * row.transpose();
    }
    let dof = (profile.len() as f64 - 3.0).max(1.0);
    let stderr = jtj
        .try_inverse()
        .map(|inv| (inv[(0, 0)] * s / dof).sqrt())
        .unwrap_or(f64::INFINITY);
    Ok(StructureFit {
        value: alpha,
        stderr,
    })
}

/// Least-squares `(A, B, rss)` for fixed exponent.
fn linear_part(profile: &[(f64, f64)], alpha: f64) -> Option<(f64, f64, f64)> {
    let n = profile.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(r, y) in profile {
        let x = r.powf(alpha);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    if det.abs() <= 1e-300 {
        return None;
    }
    let a = (n * sxy - sx * sy) / det;
    let b = (sy - a * sx) / n;
    let rss = profile
        .iter()
        .map(|&(r, y)| (y - a * r.powf(alpha) - b).powi(2))
        .sum();
    Some((a, b, rss))
}
