//! Nyström discretisation of the Lippmann–Schwinger system `(I + K_ω)u = −H_ω f`.
//!
//! `(H_ω f)(x_i) = Σ_j w_ij G(x_i − y_j) f(y_j)` over the source grid with
//! `w_ij = h²` off the diagonal and the cell integral of `G` on it.
//! `K_ω u = H_ω(Mu)`. The kernel is translation invariant, so `H_ω` is
//! applied by zero-padded FFT convolution on a `2n × 2n` grid.
//!
//! Since `Mu` only sees `u` on `supp M`, the system is solved for those
//! unknowns alone and the full field is reconstructed as `u = −H(f + Mu)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, domain, Error, Result};
use crate::fft::Fft2;
use crate::green::{
    green_entries, leading_entries, leading_entries_split, leading_self_cell_integral,
    leading_self_cell_split, self_cell_integral,
};
use crate::grid::{check_collar, Bump, SourceGrid};
use crate::krylov::gmres;
use crate::medium::ElasticMedium;
use crate::randfield::SourceRealization;

/// Minimum cells per shear wavelength.
pub const MIN_CELLS_PER_WAVELENGTH: f64 = 10.0;

/// Largest restricted system (in unknowns) factorised densely.
pub const DENSE_LIMIT: usize = 600;

/// Condition estimate above which a system is reported unsolvable.
pub const CONDITION_LIMIT: f64 = 1e12;

pub const DENSE_RESIDUAL_TOL: f64 = 1e-10;
pub const ITERATIVE_RESIDUAL_TOL: f64 = 1e-8;
const GMRES_TOL: f64 = 1e-11;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 1500;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Symmetric matrix field `M` on the source grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPerturbation {
    pub m11: Vec<f64>,
    pub m12: Vec<f64>,
    pub m22: Vec<f64>,
}

impl DensityPerturbation {
    pub fn new(m11: Vec<f64>, m12: Vec<f64>, m22: Vec<f64>, grid: &SourceGrid) -> Result<Self> {
        for (name, v) in [("M11", &m11), ("M12", &m12), ("M22", &m22)] {
            if v.len() != grid.len() {
                return Err(Error::Input(format!(
                    "{name} has {} samples, grid has {}",
                    v.len(),
                    grid.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return config(format!("{name} has non-finite entries"));
            }
            check_collar(v, grid, 2, name)?;
        }
        Ok(Self { m11, m12, m22 })
    }

    pub fn zeros(grid: &SourceGrid) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            m11: z.clone(),
            m12: z.clone(),
            m22: z,
        }
    }

    /// `bump(x) · [[a11, a12], [a12, a22]]`.
    pub fn from_bump(grid: &SourceGrid, bump: &Bump, entries: [f64; 3]) -> Result<Self> {
        let b = grid.sample(|p| bump.eval(p));
        let scaled = |c: f64| b.iter().map(|v| v * c).collect::<Vec<_>>();
        Self::new(
            scaled(entries[0]),
            scaled(entries[1]),
            scaled(entries[2]),
            grid,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.m11
            .iter()
            .chain(&self.m12)
            .chain(&self.m22)
            .all(|v| *v == 0.0)
    }

    /// Cells where any entry is nonzero, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.m11.len())
            .filter(|&k| self.m11[k] != 0.0 || self.m12[k] != 0.0 || self.m22[k] != 0.0)
            .collect()
    }

    /// Largest pointwise spectral norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.m11.len())
            .map(|k| {
                let (a, b, d) = (self.m11[k], self.m12[k], self.m22[k]);
                let mean = 0.5 * (a + d);
                let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
                mean.abs() + rad
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| x * c).collect();
        Self {
            m11: s(&self.m11),
            m12: s(&self.m12),
            m22: s(&self.m22),
        }
    }

    #[inline]
    fn apply_at(&self, k: usize, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        (
            a * self.m11[k] + b * self.m12[k],
            a * self.m12[k] + b * self.m22[k],
        )
    }

    /// Pointwise `M u`.
    pub fn apply(&self, u: &WaveField) -> WaveField {
        let (u1, u2) = (0..u.u1.len())
            .map(|k| self.apply_at(k, u.u1[k], u.u2[k]))
            .unzip();
        WaveField {
            u1,
            u2,
            omega: u.omega,
        }
    }
}

/// Complex displacement samples, on the grid or at measurement points.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub u1: Vec<Complex64>,
    pub u2: Vec<Complex64>,
    pub omega: f64,
}

impl WaveField {
    pub fn zeros(len: usize, omega: f64) -> Self {
        Self {
            u1: vec![ZERO; len],
            u2: vec![ZERO; len],
            omega,
        }
    }

    /// Real source as a field.
    pub fn from_source(f: &SourceRealization, omega: f64) -> Self {
        Self {
            u1: f.f1.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
            u2: f.f2.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
            omega,
        }
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.u1
            .iter()
            .chain(&self.u2)
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, c: Complex64, other: &WaveField) -> WaveField {
        let f =
            |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        WaveField {
            u1: f(&self.u1, &other.u1),
            u2: f(&self.u2, &other.u2),
            omega: self.omega,
        }
    }

    pub fn scale(&self, c: Complex64) -> WaveField {
        WaveField {
            u1: self.u1.iter().map(|z| z * c).collect(),
            u2: self.u2.iter().map(|z| z * c).collect(),
            omega: self.omega,
        }
    }

    pub fn distance(&self, other: &WaveField) -> f64 {
        self.add_scaled(Complex64::new(-1.0, 0.0), other).norm()
    }

    /// `|u(x_k)|²` per sample.
    pub fn intensity(&self) -> Vec<f64> {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }
}

/// Receiver locations outside the closed source box.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    points: Vec<[f64; 2]>,
}

impl MeasurementSet {
    pub fn new(points: Vec<[f64; 2]>, grid: &SourceGrid) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("empty measurement set".into()));
        }
        for p in &points {
            if !p.iter().all(|v| v.is_finite()) {
                return domain(format!("non-finite measurement point {p:?}"));
            }
            if grid.contains(*p) {
                return domain(format!(
                    "measurement point {p:?} lies inside the source box"
                ));
            }
        }
        Ok(Self { points })
    }

    /// `count` equally spaced points on a circle.
    pub fn ring(center: [f64; 2], radius: f64, count: usize, grid: &SourceGrid) -> Result<Self> {
        let pts = (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            })
            .collect();
        Self::new(pts, grid)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether `p` lies strictly inside the convex hull of the points.
    pub fn hull_contains(&self, p: [f64; 2]) -> bool {
        let mut ang: Vec<f64> = self
            .points
            .iter()
            .filter_map(|q| {
                let d = [q[0] - p[0], q[1] - p[1]];
                (d[0] != 0.0 || d[1] != 0.0).then(|| d[1].atan2(d[0]))
            })
            .collect();
        if ang.len() < 3 {
            return false;
        }
        ang.sort_by(f64::total_cmp);
        let mut gap = ang[0] + 2.0 * PI - ang[ang.len() - 1];
        for w in ang.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap < PI - 1e-12
    }
}

/// Refuses grids with fewer than [`MIN_CELLS_PER_WAVELENGTH`] cells per shear wavelength.
pub fn check_resolution(grid: &SourceGrid, medium: &ElasticMedium, omega: f64) -> Result<()> {
    let lambda = medium.shear_wavelength(omega)?;
    let cells = lambda / grid.h();
    if cells < MIN_CELLS_PER_WAVELENGTH {
        return config(format!(
            "grid under-resolved at omega = {omega}: {cells:.2} cells per shear wavelength, need {MIN_CELLS_PER_WAVELENGTH}"
        ));
    }
    Ok(())
}

/// Smallest power-of-two `n` resolving `omega_max` on a box of the given side.
pub fn required_grid_size(side: f64, medium: &ElasticMedium, omega_max: f64) -> Result<usize> {
    let lambda = medium.shear_wavelength(omega_max)?;
    let n = (MIN_CELLS_PER_WAVELENGTH * side / lambda).ceil() as usize;
    Ok(n.max(4).next_power_of_two())
}

/// Polar rule degree for the `G0` self-cell integral.
const LEADING_SELF_CELL_DEGREE: usize = 24;

/// Which tensor the operators are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// The exact Green tensor `G`.
    #[default]
    Full,
    /// The leading-order tensor `G0`.
    Leading,
    /// The `ω^{-1/2}` part of `G0`.
    LeadingHalf,
    /// The `ω^{-3/2}` part of `G0`.
    LeadingThreeHalves,
}

impl Kernel {
    fn entries(
        self,
        r: f64,
        zhat: [f64; 2],
        kp: f64,
        ks: f64,
        mu: f64,
        omega: f64,
    ) -> Result<[Complex64; 3]> {
        match self {
            Kernel::Full => green_entries(r, zhat, kp, ks, mu, omega),
            Kernel::Leading => Ok(leading_entries(r, zhat, kp, ks, mu, omega)),
            Kernel::LeadingHalf => Ok(leading_entries_split(r, zhat, kp, ks, mu, omega).0),
            Kernel::LeadingThreeHalves => Ok(leading_entries_split(r, zhat, kp, ks, mu, omega).1),
        }
    }

    fn self_cell(self, h: f64, medium: &ElasticMedium, omega: f64) -> Result<[Complex64; 3]> {
        match self {
            Kernel::Full => self_cell_integral(h, medium, omega),
            Kernel::Leading => {
                leading_self_cell_integral(h, medium, omega, LEADING_SELF_CELL_DEGREE)
            }
            Kernel::LeadingHalf => {
                Ok(leading_self_cell_split(h, medium, omega, LEADING_SELF_CELL_DEGREE)?.0)
            }
            Kernel::LeadingThreeHalves => {
                Ok(leading_self_cell_split(h, medium, omega, LEADING_SELF_CELL_DEGREE)?.1)
            }
        }
    }
}

/// Discrete `H_ω` on one grid at one frequency.
#[derive(Debug, Clone)]
pub struct LsOperator {
    grid: SourceGrid,
    medium: ElasticMedium,
    omega: f64,
    fft: Fft2,
    /// real-space blocks `(K11, K12, K22)` on the `2n × 2n` periodic table
    table: [Vec<Complex64>; 3],
    spectra: [Vec<Complex64>; 3],
}

impl LsOperator {
    pub fn new(grid: &SourceGrid, medium: &ElasticMedium, omega: f64) -> Result<Self> {
        Self::with_kernel(grid, medium, omega, Kernel::Full)
    }

    pub fn with_kernel(
        grid: &SourceGrid,
        medium: &ElasticMedium,
        omega: f64,
        kernel: Kernel,
    ) -> Result<Self> {
        check_resolution(grid, medium, omega)?;
        let (kp, ks) = medium.wavenumbers(omega)?;
        let n = grid.n();
        let n2 = 2 * n;
        let h = grid.h();
        let h2 = h * h;
        let mut table = [
            vec![ZERO; n2 * n2],
            vec![ZERO; n2 * n2],
            vec![ZERO; n2 * n2],
        ];
        let selfw = kernel.self_cell(h, medium, omega)?;
        for di in 0..n {
            for dj in 0..n {
                let e = if di == 0 && dj == 0 {
                    selfw
                } else {
                    let (zx, zy) = (dj as f64 * h, di as f64 * h);
                    let r = zx.hypot(zy);
                    let g = kernel.entries(r, [zx / r, zy / r], kp, ks, medium.mu(), omega)?;
                    [g[0] * h2, g[1] * h2, g[2] * h2]
                };
                for (si, sj) in [(1isize, 1isize), (-1, 1), (1, -1), (-1, -1)] {
                    if (si < 0 && di == 0) || (sj < 0 && dj == 0) {
                        continue;
                    }
                    let ri = (si * di as isize).rem_euclid(n2 as isize) as usize;
                    let rj = (sj * dj as isize).rem_euclid(n2 as isize) as usize;
                    let k = ri * n2 + rj;
                    table[0][k] = e[0];
                    table[1][k] = e[1] * (si * sj) as f64;
                    table[2][k] = e[2];
                }
            }
        }
        let fft = Fft2::new(n2);
        let spectra = table.clone().map(|mut t| {
            fft.forward(&mut t);
            t
        });
        Ok(Self {
            grid: *grid,
            medium: *medium,
            omega,
            fft,
            table,
            spectra,
        })
    }

    pub fn grid(&self) -> &SourceGrid {
        &self.grid
    }

    pub fn medium(&self) -> &ElasticMedium {
        &self.medium
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Weighted block `w G` for target cell minus source cell offset `(di, dj)` in (row, column).
    pub fn block(&self, di: isize, dj: isize) -> [Complex64; 3] {
        let n2 = 2 * self.grid.n() as isize;
        let k = (di.rem_euclid(n2) * n2 + dj.rem_euclid(n2)) as usize;
        [self.table[0][k], self.table[1][k], self.table[2][k]]
    }

    /// `H_ω` applied to complex component arrays.
    pub fn apply_h_parts(
        &self,
        f1: &[Complex64],
        f2: &[Complex64],
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n();
        let n2 = 2 * n;
        let mut a = vec![ZERO; n2 * n2];
        let mut b = vec![ZERO; n2 * n2];
        for i in 0..n {
            a[i * n2..i * n2 + n].copy_from_slice(&f1[i * n..(i + 1) * n]);
            b[i * n2..i * n2 + n].copy_from_slice(&f2[i * n..(i + 1) * n]);
        }
        self.fft.forward(&mut a);
        self.fft.forward(&mut b);
        let norm = 1.0 / (n2 * n2) as f64;
        for k in 0..n2 * n2 {
            let (x, y) = (a[k], b[k]);
            a[k] = (self.spectra[0][k] * x + self.spectra[1][k] * y) * norm;
            b[k] = (self.spectra[1][k] * x + self.spectra[2][k] * y) * norm;
        }
        self.fft.inverse(&mut a);
        self.fft.inverse(&mut b);
        let mut o1 = Vec::with_capacity(n * n);
        let mut o2 = Vec::with_capacity(n * n);
        for i in 0..n {
            o1.extend_from_slice(&a[i * n2..i * n2 + n]);
            o2.extend_from_slice(&b[i * n2..i * n2 + n]);
        }
        (o1, o2)
    }

    pub fn apply_h(&self, f: &WaveField) -> Result<WaveField> {
        self.check_len(f.len())?;
        let (u1, u2) = self.apply_h_parts(&f.u1, &f.u2);
        Ok(WaveField {
            u1,
            u2,
            omega: self.omega,
        })
    }

    pub fn apply_h_source(&self, f: &SourceRealization) -> Result<WaveField> {
        self.apply_h(&WaveField::from_source(f, self.omega))
    }

    /// `K_ω u = H_ω(M u)`.
    pub fn apply_k(&self, u: &WaveField, m: &DensityPerturbation) -> Result<WaveField> {
        self.check_len(u.len())?;
        self.check_len(m.m11.len())?;
        self.apply_h(&m.apply(u))
    }

    /// `K_ω^H v = M conj(H conj(v))`; `H` is complex symmetric.
    fn apply_k_adjoint(&self, v: &WaveField, m: &DensityPerturbation) -> WaveField {
        let c = |x: &[Complex64]| x.iter().map(|z| z.conj()).collect::<Vec<_>>();
        let (a, b) = self.apply_h_parts(&c(&v.u1), &c(&v.u2));
        m.apply(&WaveField {
            u1: c(&a),
            u2: c(&b),
            omega: self.omega,
        })
    }

    /// Power-iteration estimate of the spectral norm `‖K_ω‖` from a seeded random start.
    pub fn norm_k(&self, m: &DensityPerturbation, iterations: usize, seed: u64) -> Result<f64> {
        self.check_len(m.m11.len())?;
        if m.is_zero() {
            return Ok(0.0);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut draw = || {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(a, b)
        };
        let len = self.grid.len();
        let mut x = WaveField {
            u1: (0..len).map(|_| draw()).collect(),
            u2: (0..len).map(|_| draw()).collect(),
            omega: self.omega,
        };
        x = m.apply(&x);
        let mut est = 0.0;
        for _ in 0..iterations.max(1) {
            let nx = x.norm();
            if nx == 0.0 {
                return Ok(0.0);
            }
            x = x.scale(Complex64::new(1.0 / nx, 0.0));
            let y = self.apply_k(&x, m)?;
            est = y.norm();
            x = self.apply_k_adjoint(&y, m);
        }
        Ok(est)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(Error::Input(format!(
                "field has {len} samples, grid has {}",
                self.grid.len()
            )));
        }
        Ok(())
    }
}

enum Factor {
    None,
    Dense {
        lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
        a: DMatrix<Complex64>,
    },
    Iterative,
}

/// `(I + K_ω)` restricted to `supp M`, prepared for repeated right-hand sides.
pub struct RestrictedSystem<'a> {
    op: &'a LsOperator,
    m: DensityPerturbation,
    support: Vec<usize>,
    factor: Factor,
    condition: Option<f64>,
}

/// How a solve was carried out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    /// `M ≡ 0`: no system to solve.
    Trivial,
    Dense,
    Gmres {
        iterations: usize,
    },
}

/// Solution on the grid with diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: WaveField,
    /// `‖(I+K)u + Hf‖ / ‖Hf‖` on the full grid.
    pub residual: f64,
    pub method: SolveMethod,
    pub condition_estimate: Option<f64>,
}

impl<'a> RestrictedSystem<'a> {
    pub fn new(op: &'a LsOperator, m: &DensityPerturbation) -> Result<Self> {
        op.check_len(m.m11.len())?;
        let support = m.support();
        let mut sys = Self {
            op,
            m: m.clone(),
            support,
            factor: Factor::None,
            condition: None,
        };
        let dim = 2 * sys.support.len();
        if dim == 0 {
            return Ok(sys);
        }
        if dim > DENSE_LIMIT {
            sys.factor = Factor::Iterative;
            return Ok(sys);
        }
        let a = sys.dense_matrix();
        let anorm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let lu = a.clone().lu();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
        let mut inv_est: f64 = 0.0;
        for _ in 0..4 {
            let x = nalgebra::DVector::from_fn(dim, |_, _| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(a, b)
            });
            match lu.solve(&x) {
                Some(y) if y.iter().all(|z| z.is_finite()) => {
                    inv_est = inv_est.max(y.norm() / x.norm())
                }
                _ => inv_est = f64::INFINITY,
            }
        }
        let cond = anorm * inv_est;
        if !(cond <= CONDITION_LIMIT) {
            return Err(Error::Solvability {
                omega: op.omega,
                detail: format!("condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:e}"),
            });
        }
        sys.condition = Some(cond);
        sys.factor = Factor::Dense { lu, a };
        Ok(sys)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn condition_estimate(&self) -> Option<f64> {
        self.condition
    }

    /// Dense `I + K` on the support unknowns `[u1|_S, u2|_S]`.
    fn dense_matrix(&self) -> DMatrix<Complex64> {
        let s = &self.support;
        let ns = s.len();
        let n = self.op.grid.n();
        let mut a = DMatrix::from_element(2 * ns, 2 * ns, ZERO);
        for (p, &ki) in s.iter().enumerate() {
            let (ii, ij) = ((ki / n) as isize, (ki % n) as isize);
            for (q, &kj) in s.iter().enumerate() {
                let (ji, jj) = ((kj / n) as isize, (kj % n) as isize);
                let [g11, g12, g22] = self.op.block(ii - ji, ij - jj);
                let (m11, m12, m22) = (self.m.m11[kj], self.m.m12[kj], self.m.m22[kj]);
                a[(p, q)] = g11 * m11 + g12 * m12;
                a[(p, ns + q)] = g11 * m12 + g12 * m22;
                a[(ns + p, q)] = g12 * m11 + g22 * m12;
                a[(ns + p, ns + q)] = g12 * m12 + g22 * m22;
            }
        }
        for d in 0..2 * ns {
            a[(d, d)] += 1.0;
        }
        a
    }

    fn restricted_apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let ns = self.support.len();
        let len = self.op.grid.len();
        let mut w = WaveField::zeros(len, self.op.omega);
        for (p, &k) in self.support.iter().enumerate() {
            w.u1[k] = v[p];
            w.u2[k] = v[ns + p];
        }
        let kw = self.op.apply_h(&self.m.apply(&w)).expect("sizes match");
        let mut out = v.to_vec();
        for (p, &k) in self.support.iter().enumerate() {
            out[p] += kw.u1[k];
            out[ns + p] += kw.u2[k];
        }
        out
    }

    /// Solves `(I+K)u = rhs` for `u` on the support; `rhs` is a full-grid field.
    pub fn solve_on_support(&self, rhs: &WaveField) -> Result<(Vec<Complex64>, SolveMethod)> {
        let ns = self.support.len();
        let b: Vec<Complex64> = self
            .support
            .iter()
            .map(|&k| rhs.u1[k])
            .chain(self.support.iter().map(|&k| rhs.u2[k]))
            .collect();
        match &self.factor {
            Factor::None => Ok((Vec::new(), SolveMethod::Trivial)),
            Factor::Dense { lu, .. } => {
                let x = lu.solve(&nalgebra::DVector::from_vec(b)).ok_or_else(|| {
                    Error::Solvability {
                        omega: self.op.omega,
                        detail: "singular LU factor".into(),
                    }
                })?;
                debug_assert_eq!(x.len(), 2 * ns);
                Ok((x.as_slice().to_vec(), SolveMethod::Dense))
            }
            Factor::Iterative => {
                let sol = gmres(
                    |v| self.restricted_apply(v),
                    &b,
                    GMRES_TOL,
                    GMRES_RESTART,
                    GMRES_MAX_ITER,
                )?;
                Ok((
                    sol.x,
                    SolveMethod::Gmres {
                        iterations: sol.iterations,
                    },
                ))
            }
        }
    }

    /// [`solve_on_support`](Self::solve_on_support) followed by a check of the
    /// restricted residual `‖(I+K)v − rhs‖ / ‖rhs‖` on the support.
    ///
    /// Off the support `u` is given explicitly by `rhs − H(Mv)`, so the restricted
    /// residual is the residual of the full system.
    pub fn solve_on_support_checked(
        &self,
        rhs: &WaveField,
    ) -> Result<(Vec<Complex64>, SolveMethod, f64)> {
        let (v, method) = self.solve_on_support(rhs)?;
        if method == SolveMethod::Trivial {
            return Ok((v, method, 0.0));
        }
        let b: Vec<Complex64> = self
            .support
            .iter()
            .map(|&k| rhs.u1[k])
            .chain(self.support.iter().map(|&k| rhs.u2[k]))
            .collect();
        let av = match &self.factor {
            Factor::Dense { a, .. } => (a * nalgebra::DVector::from_column_slice(&v))
                .as_slice()
                .to_vec(),
            _ => self.restricted_apply(&v),
        };
        let num = av
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let residual = if den == 0.0 { num } else { num / den };
        let tol = match method {
            SolveMethod::Gmres { .. } => ITERATIVE_RESIDUAL_TOL,
            _ => DENSE_RESIDUAL_TOL,
        };
        if !(residual <= tol) {
            return Err(Error::Solvability {
                omega: self.op.omega,
                detail: format!("restricted residual {residual:.3e} above {tol:e}"),
            });
        }
        Ok((v, method, residual))
    }

    /// Writes support values into `M u` on the full grid.
    pub fn m_times(&self, v: &[Complex64]) -> WaveField {
        let ns = self.support.len();
        let mut w = WaveField::zeros(self.op.grid.len(), self.op.omega);
        for (p, &k) in self.support.iter().enumerate() {
            let (a, b) = self.m.apply_at(k, v[p], v[ns + p]);
            w.u1[k] = a;
            w.u2[k] = b;
        }
        w
    }

    /// Full solve of `(I+K)u = −Hf` with residual check.
    pub fn solve(&self, f: &SourceRealization) -> Result<SolveReport> {
        let hf = self.op.apply_h_source(f)?;
        let rhs = hf.scale(Complex64::new(-1.0, 0.0));
        let (v, method) = self.solve_on_support(&rhs)?;
        let field = match method {
            SolveMethod::Trivial => rhs.clone(),
            _ => {
                let hmu = self.op.apply_h(&self.m_times(&v))?;
                rhs.add_scaled(Complex64::new(-1.0, 0.0), &hmu)
            }
        };
        let ku = self.op.apply_k(&field, &self.m)?;
        let res = field
            .add_scaled(Complex64::new(1.0, 0.0), &ku)
            .add_scaled(Complex64::new(1.0, 0.0), &hf);
        let hnorm = hf.norm();
        let residual = if hnorm == 0.0 {
            res.norm()
        } else {
            res.norm() / hnorm
        };
        let tol = match method {
            SolveMethod::Gmres { .. } => ITERATIVE_RESIDUAL_TOL,
            _ => DENSE_RESIDUAL_TOL,
        };
        if !(residual <= tol) {
            return Err(Error::Solvability {
                omega: self.op.omega,
                detail: format!("residual {residual:.3e} above {tol:e}"),
            });
        }
        Ok(SolveReport {
            field,
            residual,
            method,
            condition_estimate: self.condition,
        })
    }
}

/// Solves `(I + K_ω)u = −H_ω f` on the grid.
pub fn solve_direct(
    f: &SourceRealization,
    m: &DensityPerturbation,
    medium: &ElasticMedium,
    omega: f64,
    grid: &SourceGrid,
) -> Result<SolveReport> {
    let op = LsOperator::new(grid, medium, omega)?;
    RestrictedSystem::new(&op, m)?.solve(f)
}

/// Born terms `u_0 = −H f`, `u_k = −K u_{k−1}` for `k = 0..=n`.
pub fn born_terms(
    op: &LsOperator,
    f: &SourceRealization,
    m: &DensityPerturbation,
    n: usize,
) -> Result<Vec<WaveField>> {
    let mut out = vec![op.apply_h_source(f)?.scale(Complex64::new(-1.0, 0.0))];
    for _ in 0..n {
        let prev = out.last().expect("nonempty");
        out.push(op.apply_k(prev, m)?.scale(Complex64::new(-1.0, 0.0)));
    }
    Ok(out)
}

/// The `n`-th Born term on the grid.
pub fn born_term(
    n: usize,
    f: &SourceRealization,
    m: &DensityPerturbation,
    medium: &ElasticMedium,
    omega: f64,
    grid: &SourceGrid,
) -> Result<WaveField> {
    let op = LsOperator::new(grid, medium, omega)?;
    Ok(born_terms(&op, f, m, n)?.pop().expect("nonempty"))
}

/// Number of power iterations used for `‖K_ω‖`.
pub const POWER_ITERATIONS: usize = 20;

/// Geometric majorant of the Born tail beyond `u_0 + u_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub norm_k: f64,
    pub bound: f64,
}

/// `‖K‖² ‖u0‖ / (1 − ‖K‖)`, failing when the measured `‖K‖ ≥ 1`.
pub fn born_tail_bound(
    u0_norm: f64,
    m: &DensityPerturbation,
    medium: &ElasticMedium,
    omega: f64,
    grid: &SourceGrid,
) -> Result<TailBound> {
    let op = LsOperator::new(grid, medium, omega)?;
    tail_bound_with(&op, u0_norm, m)
}

pub fn tail_bound_with(
    op: &LsOperator,
    u0_norm: f64,
    m: &DensityPerturbation,
) -> Result<TailBound> {
    let norm_k = op.norm_k(m, POWER_ITERATIONS, 0x6b6e)?;
    if norm_k >= 1.0 {
        return Err(Error::Convergence {
            iterations: POWER_ITERATIONS,
            residual: norm_k,
            detail: format!(
                "Born series diverges at omega = {}: ||K|| = {norm_k:.4}",
                op.omega
            ),
        });
    }
    Ok(TailBound {
        norm_k,
        bound: norm_k * norm_k * u0_norm / (1.0 - norm_k),
    })
}

/// `u0`, `u1` at measurement points with the grid tail majorant.
#[derive(Debug, Clone)]
pub struct BornTerms {
    pub u0: WaveField,
    pub u1: WaveField,
    /// `‖K‖²‖u0‖/(1−‖K‖)` in the grid norm.
    pub tail_bound: f64,
}

/// First two Born terms carried out to the measurement points.
pub fn born_terms_exterior(
    op: &LsOperator,
    f: &SourceRealization,
    m: &DensityPerturbation,
    points: &MeasurementSet,
) -> Result<BornTerms> {
    let grid = op.grid();
    let terms = born_terms(op, f, m, 0)?;
    let u0g = &terms[0];
    let tail = tail_bound_with(op, u0g.norm(), m)?;
    let fcells: Vec<usize> = (0..grid.len())
        .filter(|&k| f.f1[k] != 0.0 || f.f2[k] != 0.0)
        .collect();
    let fmap = ExteriorMap::new(grid, op.medium(), op.omega(), points, fcells)?;
    let s1: Vec<f64> = fmap.cells().iter().map(|&k| f.f1[k]).collect();
    let s2: Vec<f64> = fmap.cells().iter().map(|&k| f.f2[k]).collect();
    let u0 = fmap.apply_real(&s1, &s2);
    let mmap = ExteriorMap::new(grid, op.medium(), op.omega(), points, m.support())?;
    let mu0 = m.apply(u0g);
    let t1: Vec<Complex64> = mmap.cells().iter().map(|&k| mu0.u1[k]).collect();
    let t2: Vec<Complex64> = mmap.cells().iter().map(|&k| mu0.u2[k]).collect();
    // u1 = −K u0, so u1(x) = −Σ h² G(x−y) M u0(y)
    let u1 = mmap.apply(&t1, &t2);
    Ok(BornTerms {
        u0,
        u1,
        tail_bound: tail.bound,
    })
}

/// Quadrature rows `h² G(x_p − y_c)` from measurement points to a set of cells.
#[derive(Debug, Clone)]
pub struct ExteriorMap {
    cells: Vec<usize>,
    /// per point, per cell: `(G11, G12, G22) h²`
    rows: Vec<Vec<[Complex64; 3]>>,
    omega: f64,
}

impl ExteriorMap {
    pub fn new(
        grid: &SourceGrid,
        medium: &ElasticMedium,
        omega: f64,
        points: &MeasurementSet,
        cells: Vec<usize>,
    ) -> Result<Self> {
        Self::with_kernel(grid, medium, omega, points, cells, Kernel::Full)
    }

    pub fn with_kernel(
        grid: &SourceGrid,
        medium: &ElasticMedium,
        omega: f64,
        points: &MeasurementSet,
        cells: Vec<usize>,
        kernel: Kernel,
    ) -> Result<Self> {
        let (kp, ks) = medium.wavenumbers(omega)?;
        let h2 = grid.h() * grid.h();
        let mut rows = Vec::with_capacity(points.len());
        for x in points.points() {
            if grid.contains(*x) {
                return domain(format!("point {x:?} lies inside the source box"));
            }
            let mut row = Vec::with_capacity(cells.len());
            for &c in &cells {
                let y = grid.center_of(c);
                let (zx, zy) = (x[0] - y[0], x[1] - y[1]);
                let r = zx.hypot(zy);
                let g = kernel.entries(r, [zx / r, zy / r], kp, ks, medium.mu(), omega)?;
                row.push([g[0] * h2, g[1] * h2, g[2] * h2]);
            }
            rows.push(row);
        }
        Ok(Self { cells, rows, omega })
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// `h² (G11, G12, G22)(x_p − y_c)` for the `c`-th cell of `cells()`.
    pub fn weight(&self, p: usize, c: usize) -> [Complex64; 3] {
        self.rows[p][c]
    }

    /// `−Σ_c h² G(x_p − y_c) s(y_c)` with `s` given per cell in `cells()` order.
    pub fn apply(&self, s1: &[Complex64], s2: &[Complex64]) -> WaveField {
        let mut out = WaveField::zeros(self.rows.len(), self.omega);
        for (p, row) in self.rows.iter().enumerate() {
            let (mut a, mut b) = (ZERO, ZERO);
            for (g, (x, y)) in row.iter().zip(s1.iter().zip(s2)) {
                a += g[0] * x + g[1] * y;
                b += g[1] * x + g[2] * y;
            }
            out.u1[p] = -a;
            out.u2[p] = -b;
        }
        out
    }

    /// Same as [`apply`](Self::apply) for a real source.
    pub fn apply_real(&self, s1: &[f64], s2: &[f64]) -> WaveField {
        let c = |v: &[f64]| {
            v.iter()
                .map(|x| Complex64::new(*x, 0.0))
                .collect::<Vec<_>>()
        };
        self.apply(&c(s1), &c(s2))
    }
}

/// `u(x) = −Σ h² G(x − y)(M u + f)(y)` at each measurement point.
pub fn evaluate_exterior(
    u: &WaveField,
    f: &SourceRealization,
    m: &DensityPerturbation,
    medium: &ElasticMedium,
    omega: f64,
    points: &MeasurementSet,
    grid: &SourceGrid,
) -> Result<WaveField> {
    if u.len() != grid.len() || f.f1.len() != grid.len() || m.m11.len() != grid.len() {
        return Err(Error::Input(
            "field, source and perturbation must live on the grid".into(),
        ));
    }
    let mu = m.apply(u);
    let cells: Vec<usize> = (0..grid.len())
        .filter(|&k| f.f1[k] != 0.0 || f.f2[k] != 0.0 || mu.u1[k] != ZERO || mu.u2[k] != ZERO)
        .collect();
    let map = ExteriorMap::new(grid, medium, omega, points, cells)?;
    let s1: Vec<Complex64> = map.cells().iter().map(|&k| mu.u1[k] + f.f1[k]).collect();
    let s2: Vec<Complex64> = map.cells().iter().map(|&k| mu.u2[k] + f.f2[k]).collect();
    Ok(map.apply(&s1, &s2))
}
