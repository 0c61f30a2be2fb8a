//! The inverse side: frequency-averaged intensities, the Riesz-type forward
//! map `x ↦ a ∫ φ(y)/|x−y| dy`, diagnostics of the Born decomposition, and
//! regularised recovery of `φ`.
//!
//! Frequency sweeps are data-parallel over `ω`; every reduction runs in a
//! fixed order, so results do not depend on the thread count.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, domain, Error, Result};
use crate::fft::Fft2;
use crate::grid::SourceGrid;
use crate::lseq::{
    check_resolution, DensityPerturbation, ExteriorMap, Kernel, LsOperator, MeasurementSet,
    RestrictedSystem, WaveField,
};
use crate::medium::ElasticMedium;
use crate::randfield::{
    covariance_spectrum, SourceModel, SourceRealization, Synthesizer, MAX_ORDER, MIN_ORDER,
};
use crate::stats::{loglog_slope, median};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform nodes `1 = ω_0 < … < ω_{n−1} = Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    q: f64,
    n: usize,
}

impl FrequencyGrid {
    pub const DEFAULT_NODES: usize = 128;

    pub fn new(q: f64, n: usize) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return config(format!("band limit Q must exceed 1, got {q}"));
        }
        if n < 2 {
            return config(format!("need at least 2 frequencies, got {n}"));
        }
        Ok(Self { q, n })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.q - 1.0) / (self.n - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.q
        } else {
            1.0 + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Same node count on `[1, q]`.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::new(q, self.n)
    }
}

/// Trapezoid approximation of `(1/(Q−1)) ∫_1^Q ω^{m+1} I(ω) dω` from samples `I(ω_k)`.
pub fn freq_average_intensity(intensity: &[f64], freq: &FrequencyGrid, m: f64) -> Result<f64> {
    if intensity.len() != freq.len() {
        return Err(Error::Input(format!(
            "{} intensity samples for {} frequencies",
            intensity.len(),
            freq.len()
        )));
    }
    if let Some(v) = intensity.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite intensity {v}")));
    }
    let last = freq.len() - 1;
    let mut acc = 0.0;
    for (k, v) in intensity.iter().enumerate() {
        let w = if k == 0 || k == last { 0.5 } else { 1.0 };
        acc += w * freq.node(k).powf(m + 1.0) * v;
    }
    Ok(acc * freq.step() / (freq.q() - 1.0))
}

/// Frequency average at one point of a sweep of fields tagged with the grid nodes.
pub fn freq_average(
    fields: &[WaveField],
    point: usize,
    freq: &FrequencyGrid,
    m: f64,
) -> Result<f64> {
    if fields.len() != freq.len() {
        return Err(Error::Input(format!(
            "{} fields for {} frequencies",
            fields.len(),
            freq.len()
        )));
    }
    let mut intensity = Vec::with_capacity(fields.len());
    for (k, f) in fields.iter().enumerate() {
        let w = freq.node(k);
        if (f.omega - w).abs() > 1e-12 * w {
            return Err(Error::Input(format!(
                "field {k} is tagged omega = {}, grid node is {w}",
                f.omega
            )));
        }
        if point >= f.len() {
            return Err(Error::Input(format!(
                "point {point} out of range for {} samples",
                f.len()
            )));
        }
        intensity.push(f.u1[point].norm_sqr() + f.u2[point].norm_sqr());
    }
    freq_average_intensity(&intensity, freq, m)
}

/// Left-hand side of the recovery identity, one value per measurement point.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedData {
    pub values: Vec<f64>,
    pub q: f64,
    pub m: f64,
}

/// `a = (c_s^{3−m} + c_p^{3−m}) / (32π)`.
pub fn riesz_constant(m: f64, medium: &ElasticMedium) -> Result<f64> {
    if !(MIN_ORDER..MAX_ORDER).contains(&m) {
        return domain(format!("order m = {m} outside the valid range [2, 5/2)"));
    }
    Ok((medium.c_s().powf(3.0 - m) + medium.c_p().powf(3.0 - m)) / (32.0 * PI))
}

/// `a ∫ φ(y)/|x−y| dy` per point, with the constant used.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszData {
    pub values: Vec<f64>,
    pub a: f64,
}

fn check_points(points: &MeasurementSet, grid: &SourceGrid) -> Result<()> {
    match points.points().iter().find(|p| grid.contains(**p)) {
        Some(p) => domain(format!("point {p:?} lies inside the source box")),
        None => Ok(()),
    }
}

/// Midpoint-rule matrix of the forward map: `A[p, c] = a h² / |x_p − y_c|`.
pub fn riesz_matrix(
    grid: &SourceGrid,
    points: &MeasurementSet,
    m: f64,
    medium: &ElasticMedium,
) -> Result<DMatrix<f64>> {
    check_points(points, grid)?;
    let a = riesz_constant(m, medium)?;
    let h2 = grid.h() * grid.h();
    Ok(DMatrix::from_fn(points.len(), grid.len(), |p, c| {
        let x = points.points()[p];
        let y = grid.center_of(c);
        a * h2 / (x[0] - y[0]).hypot(x[1] - y[1])
    }))
}

pub fn riesz_forward(
    phi: &[f64],
    grid: &SourceGrid,
    points: &MeasurementSet,
    m: f64,
    medium: &ElasticMedium,
) -> Result<RieszData> {
    if phi.len() != grid.len() {
        return Err(Error::Input(format!(
            "phi has {} samples, grid has {}",
            phi.len(),
            grid.len()
        )));
    }
    if let Some(v) = phi.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Input(format!(
            "phi must be finite and nonnegative, found {v}"
        )));
    }
    check_points(points, grid)?;
    let a = riesz_constant(m, medium)?;
    let h2 = grid.h() * grid.h();
    let values = points
        .points()
        .iter()
        .map(|x| {
            phi.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, v)| {
                    let y = grid.center_of(c);
                    v / (x[0] - y[0]).hypot(x[1] - y[1])
                })
                .sum::<f64>()
                * a
                * h2
        })
        .collect();
    Ok(RieszData { values, a })
}

/// Estimated `φ` on a recovery grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredStrength {
    pub phi_hat: Vec<f64>,
    pub grid: SourceGrid,
    pub reg: f64,
    /// `‖Aφ̂ − d‖ / ‖d‖` (absolute when `d = 0`).
    pub residual: f64,
    /// Relative `ℓ²` error against the supplied truth.
    pub rel_error: Option<f64>,
}

/// Forward differences along rows and columns; `‖Lφ‖²` approximates `∫|∇φ|²`.
pub fn gradient_matrix(grid: &SourceGrid) -> DMatrix<f64> {
    let n = grid.n();
    let rows = 2 * n * (n - 1);
    let mut l = DMatrix::zeros(rows, n * n);
    let mut r = 0;
    for i in 0..n {
        for j in 0..n - 1 {
            l[(r, i * n + j)] = -1.0;
            l[(r, i * n + j + 1)] = 1.0;
            r += 1;
        }
    }
    for i in 0..n - 1 {
        for j in 0..n {
            l[(r, i * n + j)] = -1.0;
            l[(r, (i + 1) * n + j)] = 1.0;
            r += 1;
        }
    }
    l
}

/// Lawson–Hanson active-set solution of `min ‖Bx − c‖, x ≥ 0`.
pub fn nnls(b: &DMatrix<f64>, c: &DVector<f64>, max_outer: usize) -> Result<DVector<f64>> {
    let ncol = b.ncols();
    let mut x = DVector::zeros(ncol);
    let mut passive = vec![false; ncol];
    let scale = b.norm() * c.norm();
    if scale == 0.0 {
        return Ok(x);
    }
    let tol = 1e-13 * scale;
    let mut trace = Vec::new();
    for _ in 0..max_outer {
        let resid = c - b * &x;
        trace.push(resid.norm());
        let w = b.tr_mul(&resid);
        let pick = (0..ncol)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match pick {
            Some(t) if w[t] > tol => passive[t] = true,
            _ => return Ok(x),
        }
        loop {
            let idx: Vec<usize> = (0..ncol).filter(|&j| passive[j]).collect();
            let sub = b.select_columns(&idx);
            let z_sub = sub
                .svd(true, true)
                .solve(c, 1e-15)
                .map_err(|e| Error::Convergence {
                    iterations: trace.len(),
                    residual: trace.last().copied().unwrap_or(f64::NAN),
                    detail: format!("least-squares subproblem failed: {e}"),
                })?;
            if z_sub.iter().all(|v| *v > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_sub[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_sub[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z_sub[k]));
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_sub[k] - x[j]);
                if x[j] <= 1e-15 * x.amax().max(f64::MIN_POSITIVE) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Err(Error::Convergence {
        iterations: max_outer,
        residual: trace.last().copied().unwrap_or(f64::NAN),
        detail: format!(
            "NNLS outer iteration cap; residual trace (last 5) {:?}",
            &trace[trace.len().saturating_sub(5)..]
        ),
    })
}

/// `min_{φ ≥ 0} ‖Aφ − d‖² + reg ‖Lφ‖²` on `grid`.
pub fn recover_phi(
    data: &AveragedData,
    grid: &SourceGrid,
    points: &MeasurementSet,
    medium: &ElasticMedium,
    reg: f64,
    truth: Option<&[f64]>,
) -> Result<RecoveredStrength> {
    if !(reg >= 0.0 && reg.is_finite()) {
        return domain(format!(
            "regularisation parameter must be nonnegative, got {reg}"
        ));
    }
    if data.values.len() != points.len() {
        return Err(Error::Input(format!(
            "{} data values for {} points",
            data.values.len(),
            points.len()
        )));
    }
    let a = riesz_matrix(grid, points, data.m, medium)?;
    solve_regularised(&a, &gradient_matrix(grid), data, grid, reg, truth)
}

fn solve_regularised(
    a: &DMatrix<f64>,
    l: &DMatrix<f64>,
    data: &AveragedData,
    grid: &SourceGrid,
    reg: f64,
    truth: Option<&[f64]>,
) -> Result<RecoveredStrength> {
    let (np, nc) = a.shape();
    let mut b = DMatrix::zeros(np + l.nrows(), nc);
    b.rows_mut(0, np).copy_from(a);
    b.rows_mut(np, l.nrows()).copy_from(&(l * reg.sqrt()));
    let mut c = DVector::zeros(np + l.nrows());
    c.rows_mut(0, np)
        .copy_from(&DVector::from_column_slice(&data.values));
    let x = nnls(&b, &c, 3 * nc)?;
    let d = DVector::from_column_slice(&data.values);
    let misfit = (a * &x - &d).norm();
    let residual = if d.norm() == 0.0 {
        misfit
    } else {
        misfit / d.norm()
    };
    let phi_hat: Vec<f64> = x.iter().copied().collect();
    let rel_error = match truth {
        None => None,
        Some(t) => {
            if t.len() != nc {
                return Err(Error::Input(format!(
                    "truth has {} samples, grid has {nc}",
                    t.len()
                )));
            }
            let num: f64 = phi_hat
                .iter()
                .zip(t)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = t.iter().map(|q| q * q).sum::<f64>().sqrt();
            Some(if den == 0.0 { num } else { num / den })
        }
    };
    Ok(RecoveredStrength {
        phi_hat,
        grid: *grid,
        reg,
        residual,
        rel_error,
    })
}

/// One point of the L-curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LCurvePoint {
    pub reg: f64,
    pub misfit: f64,
    pub seminorm: f64,
}

pub const LCURVE_CANDIDATES: usize = 8;

/// Scans 8 log-spaced parameters and keeps the corner (largest Menger curvature in log–log).
///
/// Candidates run from `10⁵ β` down to `10⁻² β` with `β = (‖A‖_F/‖L‖_F)²`. The
/// Frobenius norm of `L` grows with the cell count, so `β` alone sits well
/// below the corner.
pub fn recover_phi_lcurve(
    data: &AveragedData,
    grid: &SourceGrid,
    points: &MeasurementSet,
    medium: &ElasticMedium,
    truth: Option<&[f64]>,
) -> Result<(RecoveredStrength, Vec<LCurvePoint>)> {
    let a = riesz_matrix(grid, points, data.m, medium)?;
    let l = gradient_matrix(grid);
    let base = (a.norm() / l.norm()).powi(2);
    let d = DVector::from_column_slice(&data.values);
    let mut sols = Vec::with_capacity(LCURVE_CANDIDATES);
    let mut curve = Vec::with_capacity(LCURVE_CANDIDATES);
    for k in 0..LCURVE_CANDIDATES {
        let reg = base * 10f64.powi(5 - k as i32);
        let s = solve_regularised(&a, &l, data, grid, reg, truth)?;
        let x = DVector::from_column_slice(&s.phi_hat);
        curve.push(LCurvePoint {
            reg,
            misfit: (&a * &x - &d).norm(),
            seminorm: (&l * &x).norm(),
        });
        sols.push(s);
    }
    let logs: Vec<[f64; 2]> = curve
        .iter()
        .map(|p| [p.misfit.max(1e-300).ln(), p.seminorm.max(1e-300).ln()])
        .collect();
    let mut best = 0;
    let mut best_k = f64::NEG_INFINITY;
    for i in 1..logs.len() - 1 {
        let (p, q, r) = (logs[i - 1], logs[i], logs[i + 1]);
        let cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        let side = |u: [f64; 2], v: [f64; 2]| (u[0] - v[0]).hypot(u[1] - v[1]);
        let denom = side(p, q) * side(q, r) * side(p, r);
        let kappa = if denom > 0.0 {
            2.0 * cross.abs() / denom
        } else {
            0.0
        };
        if kappa > best_k {
            best_k = kappa;
            best = i;
        }
    }
    if best_k <= 0.0 {
        best = LCURVE_CANDIDATES / 2;
    }
    Ok((sols.swap_remove(best), curve))
}

/// Which fields a sweep computes at the measurement points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldMode {
    /// `u` from the full Lippmann–Schwinger solve.
    Full,
    /// `u ≈ u0 + u1`.
    BornOnly,
    /// `u ≈ u0`.
    U0Only,
}

impl FieldMode {
    pub fn name(self) -> &'static str {
        match self {
            FieldMode::Full => "full",
            FieldMode::BornOnly => "born-only",
            FieldMode::U0Only => "u0-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FieldMode::Full),
            "born-only" => Ok(FieldMode::BornOnly),
            "u0-only" => Ok(FieldMode::U0Only),
            _ => config(format!("unknown mode '{s}' (full | born-only | u0-only)")),
        }
    }
}

/// A complete forward experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub medium: ElasticMedium,
    pub grid: SourceGrid,
    pub model: SourceModel,
    pub perturbation: DensityPerturbation,
    pub points: MeasurementSet,
    pub freq: FrequencyGrid,
}

impl Experiment {
    /// Validates resolution at `Q` and the frequency sampling density.
    pub fn new(
        medium: ElasticMedium,
        grid: SourceGrid,
        model: SourceModel,
        perturbation: DensityPerturbation,
        points: MeasurementSet,
        freq: FrequencyGrid,
    ) -> Result<Self> {
        if model.phi().len() != grid.len() || perturbation.m11.len() != grid.len() {
            return Err(Error::Input(
                "phi and M must be sampled on the experiment grid".into(),
            ));
        }
        check_points(&points, &grid)?;
        check_resolution(&grid, &medium, freq.q())?;
        let exp = Self {
            medium,
            grid,
            model,
            perturbation,
            points,
            freq,
        };
        let c = medium.c_s().max(medium.c_p());
        let per_period = 2.0 * PI / (c * exp.diameter() * freq.step());
        if per_period < 2.0 {
            return config(format!(
                "frequency grid too coarse: {per_period:.2} samples per oscillation period, need 2"
            ));
        }
        Ok(exp)
    }

    pub fn m(&self) -> f64 {
        self.model.m()
    }

    pub fn seed(&self) -> u64 {
        self.model.seed()
    }

    /// Bounding-box diagonal of `supp φ ∪ supp M ∪ U`.
    pub fn diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut add = |p: [f64; 2]| {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        };
        for (k, v) in self.model.phi().iter().enumerate() {
            if *v != 0.0 {
                add(self.grid.center_of(k));
            }
        }
        for k in self.perturbation.support() {
            add(self.grid.center_of(k));
        }
        for p in self.points.points() {
            add(*p);
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    pub fn riesz(&self) -> Result<RieszData> {
        riesz_forward(
            self.model.phi(),
            &self.grid,
            &self.points,
            self.m(),
            &self.medium,
        )
    }

    fn phi_cells(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| self.model.phi()[k] != 0.0)
            .collect()
    }

    fn require_hull(&self) -> Result<()> {
        if !self.points.hull_contains([0.0, 0.0]) {
            return config("the origin must lie inside the convex hull of the measurement points");
        }
        Ok(())
    }
}

/// Fields at one measurement point and frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointField {
    pub u0: [Complex64; 2],
    pub u1: [Complex64; 2],
    /// The field the sweep mode stands for.
    pub u: [Complex64; 2],
}

/// Which part of a sweep to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    U0,
    U1,
    Total,
}

/// Fields at all points for every seed and frequency.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub freq: FrequencyGrid,
    pub seeds: Vec<u64>,
    pub mode: FieldMode,
    /// `fields[seed][ω][point]`
    pub fields: Vec<Vec<Vec<PointField>>>,
}

impl Sweep {
    /// `|·|²` of a part at one point across the frequency grid.
    pub fn intensity(&self, seed_idx: usize, point: usize, part: Part) -> Vec<f64> {
        self.fields[seed_idx]
            .iter()
            .map(|row| {
                let v = match part {
                    Part::U0 => row[point].u0,
                    Part::U1 => row[point].u1,
                    Part::Total => row[point].u,
                };
                v[0].norm_sqr() + v[1].norm_sqr()
            })
            .collect()
    }

    pub fn averaged(&self, seed_idx: usize, part: Part, m: f64) -> Result<AveragedData> {
        let npts = self.fields[seed_idx][0].len();
        let values = (0..npts)
            .map(|p| freq_average_intensity(&self.intensity(seed_idx, p, part), &self.freq, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(AveragedData {
            values,
            q: self.freq.q(),
            m,
        })
    }

    /// Fields of one part at all points for one seed and frequency.
    pub fn wave_field(&self, seed_idx: usize, omega_idx: usize, part: Part) -> WaveField {
        let row = &self.fields[seed_idx][omega_idx];
        let pick = |p: &PointField| match part {
            Part::U0 => p.u0,
            Part::U1 => p.u1,
            Part::Total => p.u,
        };
        WaveField {
            u1: row.iter().map(|p| pick(p)[0]).collect(),
            u2: row.iter().map(|p| pick(p)[1]).collect(),
            omega: self.freq.node(omega_idx),
        }
    }
}

fn gather(cells: &[usize], v: &[Complex64]) -> Vec<Complex64> {
    cells.iter().map(|&k| v[k]).collect()
}

fn frequency_fields(
    exp: &Experiment,
    omega: f64,
    sources: &[SourceRealization],
    fcells: &[usize],
    mode: FieldMode,
) -> Result<Vec<Vec<PointField>>> {
    let fmap = ExteriorMap::new(&exp.grid, &exp.medium, omega, &exp.points, fcells.to_vec())?;
    let u0s: Vec<WaveField> = sources
        .iter()
        .map(|f| {
            let s1: Vec<f64> = fcells.iter().map(|&k| f.f1[k]).collect();
            let s2: Vec<f64> = fcells.iter().map(|&k| f.f2[k]).collect();
            fmap.apply_real(&s1, &s2)
        })
        .collect();
    let pack = |u0: &WaveField, u1: Option<&WaveField>, u: &WaveField| -> Vec<PointField> {
        (0..u0.len())
            .map(|p| PointField {
                u0: [u0.u1[p], u0.u2[p]],
                u1: u1.map_or([ZERO; 2], |w| [w.u1[p], w.u2[p]]),
                u: [u.u1[p], u.u2[p]],
            })
            .collect()
    };
    let m = &exp.perturbation;
    if mode == FieldMode::U0Only || m.is_zero() {
        return Ok(u0s.iter().map(|u0| pack(u0, None, u0)).collect());
    }
    let op = LsOperator::new(&exp.grid, &exp.medium, omega)?;
    let mcells = m.support();
    let mmap = ExteriorMap::new(&exp.grid, &exp.medium, omega, &exp.points, mcells.clone())?;
    let sys = match mode {
        FieldMode::Full => Some(RestrictedSystem::new(&op, m)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(sources.len());
    for (f, u0) in sources.iter().zip(&u0s) {
        let u0g = op.apply_h_source(f)?.scale(Complex64::new(-1.0, 0.0));
        let mu0 = m.apply(&u0g);
        let u1 = mmap.apply(&gather(&mcells, &mu0.u1), &gather(&mcells, &mu0.u2));
        let u = match &sys {
            Some(sys) => {
                // u = u0 − Σ h² G M v with v the solution on supp M
                let (v, _, _) = sys.solve_on_support_checked(&u0g)?;
                let mu = sys.m_times(&v);
                let scat = mmap.apply(&gather(&mcells, &mu.u1), &gather(&mcells, &mu.u2));
                u0.add_scaled(Complex64::new(1.0, 0.0), &scat)
            }
            None => u0.add_scaled(Complex64::new(1.0, 0.0), &u1),
        };
        out.push(pack(u0, Some(&u1), &u));
    }
    Ok(out)
}

/// Solves the forward problem over `freq` for realization 0 of each seed.
pub fn sweep(
    exp: &Experiment,
    freq: &FrequencyGrid,
    seeds: &[u64],
    mode: FieldMode,
) -> Result<Sweep> {
    check_resolution(&exp.grid, &exp.medium, freq.q())?;
    let sources = seeds
        .iter()
        .map(|&s| Ok(Synthesizer::new(&exp.model.with_seed(s), &exp.grid)?.realization(0)))
        .collect::<Result<Vec<_>>>()?;
    let fcells = exp.phi_cells();
    let per_omega = freq
        .nodes()
        .par_iter()
        .map(|&w| frequency_fields(exp, w, &sources, &fcells, mode))
        .collect::<Result<Vec<_>>>()?;
    let mut fields = vec![Vec::with_capacity(freq.len()); seeds.len()];
    for row in per_omega {
        for (s, pts) in row.into_iter().enumerate() {
            fields[s].push(pts);
        }
    }
    Ok(Sweep {
        freq: *freq,
        seeds: seeds.to_vec(),
        mode,
        fields,
    })
}

/// Per-point comparison of the two sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointComparison {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

pub fn compare(lhs: &AveragedData, rhs: &RieszData) -> Result<Vec<PointComparison>> {
    if lhs.values.len() != rhs.values.len() {
        return Err(Error::Input(
            "averaged data and forward map differ in length".into(),
        ));
    }
    Ok(lhs
        .values
        .iter()
        .zip(&rhs.values)
        .enumerate()
        .map(|(index, (&l, &r))| PointComparison {
            index,
            lhs: l,
            rhs: r,
            rel_err: (l - r).abs() / r,
        })
        .collect())
}

fn median_err(rows: &[PointComparison]) -> f64 {
    median(&rows.iter().map(|r| r.rel_err).collect::<Vec<_>>())
}

/// Single-realization comparison at `Q` with the trend over `Q/2`, `Q/4`.
#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub mode: FieldMode,
    pub seed: u64,
    pub q: f64,
    pub a: f64,
    pub points: Vec<PointComparison>,
    pub median_rel_err: f64,
    /// `(Q', median relative error)` for `Q' ∈ {Q, Q/2, Q/4}` with `Q' > 1`.
    pub q_trend: Vec<(f64, f64)>,
    /// Averages of `u1` relative to `u0` at `Q`, per point.
    pub u1_ratio: Vec<f64>,
}

/// Band limits `Q, Q/2, Q/4` that exceed 1.
pub fn trend_bands(q: f64) -> Vec<f64> {
    [q, q / 2.0, q / 4.0]
        .into_iter()
        .filter(|v| *v > 1.0)
        .collect()
}

pub fn verify_theorem1(exp: &Experiment, mode: FieldMode) -> Result<Theorem1Report> {
    exp.require_hull()?;
    let riesz = exp.riesz()?;
    let seeds = [exp.seed()];
    let mut q_trend = Vec::new();
    let mut head = None;
    for q in trend_bands(exp.freq.q()) {
        let sw = sweep(exp, &exp.freq.with_q(q)?, &seeds, mode)?;
        let rows = compare(&sw.averaged(0, Part::Total, exp.m())?, &riesz)?;
        q_trend.push((q, median_err(&rows)));
        if head.is_none() {
            head = Some((rows, u1_ratio(&sw, 0, exp.m())?));
        }
    }
    let (points, u1_ratio) = head.expect("Q > 1");
    Ok(Theorem1Report {
        mode,
        seed: exp.seed(),
        q: exp.freq.q(),
        a: riesz.a,
        median_rel_err: median_err(&points),
        points,
        q_trend,
        u1_ratio,
    })
}

/// `avg ω^{m+1}|u1|² / avg ω^{m+1}|u0|²` per point for one seed of a sweep.
pub fn u1_ratio(sw: &Sweep, seed_idx: usize, m: f64) -> Result<Vec<f64>> {
    let a0 = sw.averaged(seed_idx, Part::U0, m)?;
    let a1 = sw.averaged(seed_idx, Part::U1, m)?;
    Ok(a1
        .values
        .iter()
        .zip(&a0.values)
        .map(|(x, y)| x / y)
        .collect())
}

/// Medians over seeds of per-seed median statistics, per band.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub mode: FieldMode,
    pub qs: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `[band][seed]` median over points of the relative error.
    pub rel_err: Vec<Vec<f64>>,
    /// `[band][seed]` median over points of the `u1` ratio.
    pub u1_ratio: Vec<Vec<f64>>,
}

impl EnsembleReport {
    pub fn median_rel_err(&self, band: usize) -> f64 {
        median(&self.rel_err[band])
    }

    pub fn median_u1_ratio(&self, band: usize) -> f64 {
        median(&self.u1_ratio[band])
    }
}

pub fn theorem1_ensemble(
    exp: &Experiment,
    seeds: &[u64],
    qs: &[f64],
    mode: FieldMode,
) -> Result<EnsembleReport> {
    exp.require_hull()?;
    if seeds.is_empty() {
        return Err(Error::Input("no seeds".into()));
    }
    let riesz = exp.riesz()?;
    let mut rel_err = Vec::new();
    let mut ratio = Vec::new();
    for &q in qs {
        let sw = sweep(exp, &exp.freq.with_q(q)?, seeds, mode)?;
        let mut e = Vec::new();
        let mut r = Vec::new();
        for s in 0..seeds.len() {
            e.push(median_err(&compare(
                &sw.averaged(s, Part::Total, exp.m())?,
                &riesz,
            )?));
            r.push(median(&u1_ratio(&sw, s, exp.m())?));
        }
        rel_err.push(e);
        ratio.push(r);
    }
    Ok(EnsembleReport {
        mode,
        qs: qs.to_vec(),
        seeds: seeds.to_vec(),
        rel_err,
        u1_ratio: ratio,
    })
}

/// `u1` ratios per band for the experiment seed.
#[derive(Debug, Clone)]
pub struct U1Report {
    pub qs: Vec<f64>,
    /// `[band][point]`
    pub per_point: Vec<Vec<f64>>,
    pub median: Vec<f64>,
}

pub fn u1_diagnostic(exp: &Experiment, qs: &[f64]) -> Result<U1Report> {
    exp.require_hull()?;
    let mut per_point = Vec::new();
    for &q in qs {
        let sw = sweep(
            exp,
            &exp.freq.with_q(q)?,
            &[exp.seed()],
            FieldMode::BornOnly,
        )?;
        per_point.push(u1_ratio(&sw, 0, exp.m())?);
    }
    let median = per_point.iter().map(|r| crate::stats::median(r)).collect();
    Ok(U1Report {
        qs: qs.to_vec(),
        per_point,
        median,
    })
}

/// `u_{1,r}` (both tensors replaced by `G0`) against `u1` at a point.
///
/// Writing `G0 = ω^{-1/2} P + ω^{-3/2} R` with `P`, `R` pure phases times
/// amplitudes, `u_{1,r} = ω^{-1} v1 + ω^{-2} v2 + ω^{-3} v3` where `v1` uses
/// `P` twice, `v2` mixes `P` and `R`, `v3` uses `R` twice. The terms are
/// evaluated separately with the split kernels.
#[derive(Debug, Clone)]
pub struct VDecompositionReport {
    pub omegas: Vec<f64>,
    pub u1r_abs: Vec<f64>,
    pub u1_abs: Vec<f64>,
    pub diff_abs: Vec<f64>,
    /// `|ω^{-k} v_k|` for `k = 1, 2, 3`, per frequency.
    pub term_abs: Vec<[f64; 3]>,
    /// Mean of `|ω^{-k} v_k|` over the frequencies.
    pub contributions: [f64; 3],
    /// `1`, `2` or `3`: the order with the largest contribution.
    pub dominant_order: usize,
    /// `‖u_{1,r} − Σ ω^{-k} v_k‖ / ‖u_{1,r}‖`, worst over frequencies.
    pub split_defect: f64,
    /// Least-squares `(c1, c2, c3)` in `|u_{1,r}| ≈ c1/ω + c2/ω² + c3/ω³`.
    pub coeffs: [f64; 3],
    /// Relative residual of that fit.
    pub fit_residual: f64,
    /// Log–log slope of `|u1 − u_{1,r}|`.
    pub diff_exponent: f64,
}

pub fn v_decomposition_diagnostic(
    exp: &Experiment,
    x: [f64; 2],
    omegas: &[f64],
) -> Result<VDecompositionReport> {
    if omegas.len() < 3 {
        return Err(Error::Input("need at least three frequencies".into()));
    }
    let points = MeasurementSet::new(vec![x], &exp.grid)?;
    let f = Synthesizer::new(&exp.model, &exp.grid)?.realization(0);
    let m = &exp.perturbation;
    let mcells = m.support();
    let neg = Complex64::new(-1.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let rows = omegas
        .par_iter()
        .map(|&w| {
            // −Σ A(x−y) M (−H_B f)(y) for kernels A (outer) and B (inner)
            let ops = [
                Kernel::Full,
                Kernel::Leading,
                Kernel::LeadingHalf,
                Kernel::LeadingThreeHalves,
            ]
            .into_iter()
            .map(|k| {
                let op = LsOperator::with_kernel(&exp.grid, &exp.medium, w, k)?;
                let map = ExteriorMap::with_kernel(
                    &exp.grid,
                    &exp.medium,
                    w,
                    &points,
                    mcells.clone(),
                    k,
                )?;
                let mu0 = m.apply(&op.apply_h_source(&f)?.scale(neg));
                Ok((map, mu0))
            })
            .collect::<Result<Vec<_>>>()?;
            let x = |outer: usize, inner: usize| {
                let mu0 = &ops[inner].1;
                ops[outer]
                    .0
                    .apply(&gather(&mcells, &mu0.u1), &gather(&mcells, &mu0.u2))
            };
            let u1 = x(0, 0);
            let u1r = x(1, 1);
            let t1 = x(2, 2);
            let t2 = x(2, 3).add_scaled(one, &x(3, 2));
            let t3 = x(3, 3);
            let sum = t1.add_scaled(one, &t2).add_scaled(one, &t3);
            let defect = if u1r.norm() == 0.0 {
                sum.norm()
            } else {
                sum.distance(&u1r) / u1r.norm()
            };
            Ok((
                u1.norm(),
                u1r.norm(),
                u1.distance(&u1r),
                [t1.norm(), t2.norm(), t3.norm()],
                defect,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let u1_abs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let u1r_abs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let term_abs: Vec<[f64; 3]> = rows.iter().map(|r| r.3).collect();
    let split_defect = rows.iter().map(|r| r.4).fold(0.0, f64::max);
    let mut contributions = [0.0; 3];
    for t in &term_abs {
        for k in 0..3 {
            contributions[k] += t[k] / omegas.len() as f64;
        }
    }
    let dominant_order = (0..3)
        .max_by(|&i, &j| contributions[i].total_cmp(&contributions[j]))
        .expect("three")
        + 1;
    let design = DMatrix::from_fn(omegas.len(), 3, |i, k| omegas[i].powi(-(k as i32) - 1));
    let rhs = DVector::from_column_slice(&u1r_abs);
    let c = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Fit(format!("three-term fit failed: {e}")))?;
    let fit_residual = if rhs.norm() == 0.0 {
        0.0
    } else {
        (&design * &c - &rhs).norm() / rhs.norm()
    };
    let diff_exponent = if diffs.iter().all(|d| *d > 0.0) {
        loglog_slope(omegas, &diffs)?
    } else {
        f64::NEG_INFINITY
    };
    Ok(VDecompositionReport {
        omegas: omegas.to_vec(),
        u1r_abs,
        u1_abs,
        diff_abs: diffs,
        term_abs,
        contributions,
        dominant_order,
        split_defect,
        coeffs: [c[0], c[1], c[2]],
        fit_residual,
        diff_exponent,
    })
}

/// `E|u0(x)|²` at one frequency from the discrete source covariance.
///
/// With `g = h² G(x−·) √φ` per tensor entry,
/// `E|Σ g f|² = h^{-2} n^{-2} Σ_k |k|^{-m} |ĝ(k)|²`, summed over entries
/// (`G12` twice).
pub fn exact_u0_moment(exp: &Experiment, omega: f64) -> Result<Vec<f64>> {
    let grid = &exp.grid;
    let n = grid.n();
    let spectrum = covariance_spectrum(exp.m(), grid);
    let fcells = exp.phi_cells();
    let sqrt_phi: Vec<f64> = exp.model.phi().iter().map(|v| v.sqrt()).collect();
    let map = ExteriorMap::new(grid, &exp.medium, omega, &exp.points, fcells.clone())?;
    let fft = Fft2::new(n);
    let scale = 1.0 / (grid.h() * grid.h() * (n * n) as f64);
    let mut out = Vec::with_capacity(exp.points.len());
    for p in 0..exp.points.len() {
        let mut total = 0.0;
        for (entry, mult) in [(0usize, 1.0), (1, 2.0), (2, 1.0)] {
            let mut buf = vec![ZERO; n * n];
            for (c, &k) in fcells.iter().enumerate() {
                buf[k] = map.weight(p, c)[entry] * sqrt_phi[k];
            }
            fft.forward(&mut buf);
            total += mult
                * buf
                    .iter()
                    .zip(&spectrum)
                    .map(|(z, s)| z.norm_sqr() * s)
                    .sum::<f64>();
        }
        out.push(total * scale);
    }
    Ok(out)
}

/// Frequency average of the exact `u0` second moment per point.
pub fn exact_moment_average(exp: &Experiment, freq: &FrequencyGrid) -> Result<AveragedData> {
    let per_omega = freq
        .nodes()
        .par_iter()
        .map(|&w| exact_u0_moment(exp, w))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..exp.points.len())
        .map(|p| {
            let col: Vec<f64> = per_omega.iter().map(|row| row[p]).collect();
            freq_average_intensity(&col, freq, exp.m())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedData {
        values,
        q: freq.q(),
        m: exp.m(),
    })
}

/// Block averages of a fine-grid field onto a coarser grid over the same box.
pub fn restrict_to(values: &[f64], fine: &SourceGrid, coarse: &SourceGrid) -> Result<Vec<f64>> {
    if fine.side() != coarse.side()
        || fine.origin() != coarse.origin()
        || !fine.n().is_multiple_of(coarse.n())
    {
        return Err(Error::Input("grids must share the box and nest".into()));
    }
    if values.len() != fine.len() {
        return Err(Error::Input("values do not match the fine grid".into()));
    }
    let r = fine.n() / coarse.n();
    let nf = fine.n();
    let nc = coarse.n();
    let mut out = vec![0.0; nc * nc];
    for (k, v) in values.iter().enumerate() {
        let (i, j) = (k / nf, k % nf);
        out[(i / r) * nc + j / r] += v;
    }
    let w = 1.0 / (r * r) as f64;
    Ok(out.into_iter().map(|v| v * w).collect())
}
