//! Green tensor of the 2D Navier operator `μΔ + (λ+μ)∇∇· + ω²`.
//!
//! With `r = |x−y|` and `ẑ = (x−y)/r`,
//!
//! ```text
//! G = [ (i/4μ) H_0(κ_s r) − (i/4ω²) Γ_1/r ] I + (i/4ω²) Γ_2 ẑẑᵀ
//! ```
//!
//! and `LG = −δI` with the outgoing radiation condition. The leading-order
//! tensor `G0` replaces every Hankel function by the first term of its
//! large-argument expansion.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::medium::ElasticMedium;
use crate::quad::CellRule;
use crate::specfun::{gamma_n_wavenumbers, hankel1, HankelOrder, SmallArgConstants};

/// `∫ ln|u| du` over the unit square centred at the origin.
pub const UNIT_CELL_LOG_MOMENT: f64 = -LN_2 / 2.0 - 1.5 + PI / 4.0;

/// Tolerance on the scaled determinant below which the symbol is refused.
pub const RESONANCE_TOL: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 2×2 complex tensor value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEval {
    pub value: Matrix2<Complex64>,
}

impl GreenEval {
    fn from_entries([g11, g12, g22]: [Complex64; 3]) -> Self {
        Self {
            value: Matrix2::new(g11, g12, g12, g22),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.value[(i, j)]
    }

    /// Entries `(G11, G12, G22)`.
    pub fn entries(&self) -> [Complex64; 3] {
        [self.value[(0, 0)], self.value[(0, 1)], self.value[(1, 1)]]
    }

    pub fn frobenius(&self) -> f64 {
        self.value.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `(κ_p, κ_s)`; same as [`ElasticMedium::wavenumbers`].
pub fn wavenumbers(medium: &ElasticMedium, omega: f64) -> Result<(f64, f64)> {
    medium.wavenumbers(omega)
}

fn separation(x: [f64; 2], y: [f64; 2], what: &str) -> Result<(f64, [f64; 2])> {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    if r == 0.0 {
        return Err(Error::SingularPoint(format!(
            "{what} evaluated at x = y = {x:?}"
        )));
    }
    if !r.is_finite() {
        return domain(format!("{what}: non-finite separation"));
    }
    Ok((r, [d[0] / r, d[1] / r]))
}

/// Entries `(G11, G12, G22)` at separation `r > 0` along unit direction `zhat`.
pub(crate) fn green_entries(
    r: f64,
    zhat: [f64; 2],
    kp: f64,
    ks: f64,
    mu: f64,
    omega: f64,
) -> Result<[Complex64; 3]> {
    let h0 = hankel1(HankelOrder::ZERO, ks * r)?;
    let g1 = gamma_n_wavenumbers(HankelOrder::ONE, r, kp, ks)?;
    let g2 = gamma_n_wavenumbers(HankelOrder::TWO, r, kp, ks)?;
    let scale = I / (4.0 * omega * omega);
    let iso = I / (4.0 * mu) * h0 - scale * g1 / r;
    let dyad = scale * g2;
    Ok([
        iso + dyad * (zhat[0] * zhat[0]),
        dyad * (zhat[0] * zhat[1]),
        iso + dyad * (zhat[1] * zhat[1]),
    ])
}

/// `H_{n,0}(x) = √(2/(πx)) e^{i(x − (n/2+1/4)π)}`.
fn h_lead(n: u32, x: f64) -> Complex64 {
    Complex64::from_polar(
        (2.0 / (PI * x)).sqrt(),
        x - (f64::from(n) / 2.0 + 0.25) * PI,
    )
}

/// `Θ_n = κ_s^n H_{n,0}(κ_s r) − κ_p^n H_{n,0}(κ_p r)`.
fn theta(n: u32, r: f64, kp: f64, ks: f64) -> Complex64 {
    let k = n as i32;
    ks.powi(k) * h_lead(n, ks * r) - kp.powi(k) * h_lead(n, kp * r)
}

/// Leading-order entries split by frequency order.
///
/// The first array collects the `H_{0,0}` and `Θ_2` terms, which scale like
/// `ω^{-1/2}` at fixed separation; the second is the `Θ_1/r` term, of order
/// `ω^{-3/2}`. Their sum is `G0`.
pub(crate) fn leading_entries_split(
    r: f64,
    zhat: [f64; 2],
    kp: f64,
    ks: f64,
    mu: f64,
    omega: f64,
) -> ([Complex64; 3], [Complex64; 3]) {
    let scale = I / (4.0 * omega * omega);
    let iso = I / (4.0 * mu) * h_lead(0, ks * r);
    let dyad = scale * theta(2, r, kp, ks);
    let half = [
        iso + dyad * (zhat[0] * zhat[0]),
        dyad * (zhat[0] * zhat[1]),
        iso + dyad * (zhat[1] * zhat[1]),
    ];
    let t1 = -scale * theta(1, r, kp, ks) / r;
    let zero = Complex64::new(0.0, 0.0);
    (half, [t1, zero, t1])
}

/// Entries of `G0` at separation `r > 0`.
pub(crate) fn leading_entries(
    r: f64,
    zhat: [f64; 2],
    kp: f64,
    ks: f64,
    mu: f64,
    omega: f64,
) -> [Complex64; 3] {
    let (a, b) = leading_entries_split(r, zhat, kp, ks, mu, omega);
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// `∫ G0(z) dz` over the cell `[−h/2, h/2]²`, by polar Gauss rule of the given degree.
///
/// `G0` is singular like `r^{-3/2}` at the centre; the rule integrates that exactly in `r`.
pub fn leading_self_cell_integral(
    h: f64,
    medium: &ElasticMedium,
    omega: f64,
    degree: usize,
) -> Result<[Complex64; 3]> {
    let (a, b) = leading_self_cell_split(h, medium, omega, degree)?;
    Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
}

/// Self-cell integrals of the `ω^{-1/2}` and `ω^{-3/2}` parts of `G0` separately.
pub fn leading_self_cell_split(
    h: f64,
    medium: &ElasticMedium,
    omega: f64,
    degree: usize,
) -> Result<([Complex64; 3], [Complex64; 3])> {
    let (kp, ks) = medium.wavenumbers(omega)?;
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("cell width must be positive, got {h}"));
    }
    let mut acc = [[Complex64::new(0.0, 0.0); 3]; 2];
    for (z, w) in CellRule::new(h, degree).points() {
        let r = z[0].hypot(z[1]);
        let (a, b) = leading_entries_split(r, [z[0] / r, z[1] / r], kp, ks, medium.mu(), omega);
        for k in 0..3 {
            acc[0][k] += a[k] * *w;
            acc[1][k] += b[k] * *w;
        }
    }
    Ok((acc[0], acc[1]))
}

/// The Green tensor `G(x, y, ω)`.
pub fn green_tensor(
    x: [f64; 2],
    y: [f64; 2],
    medium: &ElasticMedium,
    omega: f64,
) -> Result<GreenEval> {
    let (kp, ks) = medium.wavenumbers(omega)?;
    let (r, zhat) = separation(x, y, "Green tensor")?;
    Ok(GreenEval::from_entries(green_entries(
        r,
        zhat,
        kp,
        ks,
        medium.mu(),
        omega,
    )?))
}

/// The leading-order tensor `G0(x, y, ω)` built from single-term Hankel asymptotics.
pub fn green_tensor_leading(
    x: [f64; 2],
    y: [f64; 2],
    medium: &ElasticMedium,
    omega: f64,
) -> Result<GreenEval> {
    let (a, b) = green_tensor_leading_split(x, y, medium, omega)?;
    Ok(GreenEval {
        value: a.value + b.value,
    })
}

/// `G0` split into its `ω^{-1/2}` and `ω^{-3/2}` parts.
pub fn green_tensor_leading_split(
    x: [f64; 2],
    y: [f64; 2],
    medium: &ElasticMedium,
    omega: f64,
) -> Result<(GreenEval, GreenEval)> {
    let (kp, ks) = medium.wavenumbers(omega)?;
    let (r, zhat) = separation(x, y, "leading Green tensor")?;
    let (a, b) = leading_entries_split(r, zhat, kp, ks, medium.mu(), omega);
    Ok((GreenEval::from_entries(a), GreenEval::from_entries(b)))
}

/// Fourier symbol `Ĝ(ξ) = [(4π²μ|ξ|² − ω²)I + 4π²(λ+μ)ξξᵀ]^{-1}`, transform kernel `e^{−2πi x·ξ}`.
///
/// Real for real `ω`. Fails with [`Error::Resonance`] when `ξ` sits on (or within
/// `RESONANCE_TOL` of, in scaled determinant) one of the circles `|ξ| = κ/(2π)`.
pub fn green_symbol(xi: [f64; 2], medium: &ElasticMedium, omega: f64) -> Result<Matrix2<f64>> {
    medium.wavenumbers(omega)?;
    if !(xi[0].is_finite() && xi[1].is_finite()) {
        return domain("non-finite frequency vector");
    }
    let tp2 = 4.0 * PI * PI;
    let q = xi[0] * xi[0] + xi[1] * xi[1];
    let w2 = omega * omega;
    let s = tp2 * medium.mu() * q - w2;
    let p = tp2 * (medium.lambda() + 2.0 * medium.mu()) * q - w2;
    let det = s * p;
    let scale =
        (tp2 * medium.mu() * q + w2) * (tp2 * (medium.lambda() + 2.0 * medium.mu()) * q + w2);
    if det.abs() < RESONANCE_TOL * scale {
        return Err(Error::Resonance {
            xi_norm: q.sqrt(),
            det,
        });
    }
    let c = tp2 * (medium.lambda() + medium.mu());
    let v = Vector2::new(xi[0], xi[1]);
    // A = sI + c ξξᵀ, so A^{-1} = (1/s) [I − c ξξᵀ / (s + c|ξ|²)] and s + c|ξ|² = p
    Ok((Matrix2::identity() - v * v.transpose() * (c / p)) / s)
}

/// `∫ G(z) dz` over the square cell `[−h/2, h/2]²` centred on the singularity.
///
/// Uses the small-distance expansion
/// `G ≈ [−(c_s²+c_p²)/(4π) ln r + C0] I + (c_s²−c_p²)/(4π) ẑẑᵀ`
/// integrated exactly over the cell; the neglected terms are `O(h⁴ κ² ln h)`.
/// Returns `(W11, W12, W22)` with `W12 = 0` by symmetry.
pub fn self_cell_integral(h: f64, medium: &ElasticMedium, omega: f64) -> Result<[Complex64; 3]> {
    let (kp, ks) = medium.wavenumbers(omega)?;
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("cell width must be positive, got {h}"));
    }
    let cs2 = medium.c_s().powi(2);
    let cp2 = medium.c_p().powi(2);
    let c0 = Complex64::new(
        -(cs2 * (ks / 2.0).ln() + cp2 * (kp / 2.0).ln()) / (4.0 * PI),
        0.0,
    ) + 0.25 * I * (cs2 * SmallArgConstants::B0 - (cs2 - cp2) * SmallArgConstants::B1);
    let diag =
        c0 - (cs2 + cp2) / (4.0 * PI) * (h.ln() + UNIT_CELL_LOG_MOMENT) + (cs2 - cp2) / (8.0 * PI);
    let zero = Complex64::new(0.0, 0.0);
    Ok([diag * (h * h), zero, diag * (h * h)])
}
