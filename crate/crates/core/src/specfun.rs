//! Hankel functions of the first kind for integer orders 0 through 3.
//!
//! For `t < SERIES_CROSSOVER` the ascending series for `J_n` and `Y_n` are
//! summed in double-double arithmetic; above it the Hankel asymptotic
//! expansion is summed up to its smallest term. Both branches agree to
//! better than 1e-10 relative at the crossover.
//!
//! The small-argument expansions and the truncated large-argument forms are
//! exposed separately because the Green tensor analysis works with them
//! directly.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::medium::ElasticMedium;

/// Euler–Mascheroni constant to 20 significant digits.
#[allow(clippy::excessive_precision)]
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// Arguments below this use the ascending series, above it the asymptotic form.
pub const SERIES_CROSSOVER: f64 = 12.0;

const SERIES_REL_TOL: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 60;
const ASYM_MAX_TERMS: usize = 64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Order of a Hankel function, restricted to `{0, 1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HankelOrder(u8);

impl HankelOrder {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);
    pub const TWO: Self = Self(2);
    pub const THREE: Self = Self(3);

    pub fn new(n: u32) -> Result<Self> {
        if n <= 3 {
            Ok(Self(n as u8))
        } else {
            domain(format!("Hankel order must be in {{0,1,2,3}}, got {n}"))
        }
    }

    pub fn get(self) -> u32 {
        u32::from(self.0)
    }

    /// `e^{-i(n/2 + 1/4)π}`, the constant phase of the asymptotic form.
    fn phase(self) -> Complex64 {
        let s = FRAC_1_SQRT_2;
        match self.0 {
            0 => Complex64::new(s, -s),
            1 => Complex64::new(-s, -s),
            2 => Complex64::new(-s, s),
            _ => Complex64::new(s, s),
        }
    }
}

impl TryFrom<u32> for HankelOrder {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        Self::new(n)
    }
}

/// Constant terms `b_n` of the small-argument expansions.
pub struct SmallArgConstants;

impl SmallArgConstants {
    pub const GAMMA_EULER: f64 = EULER_GAMMA;
    pub const B0: Complex64 = Complex64::new(1.0, 2.0 * EULER_GAMMA / PI);
    pub const B1: Complex64 = Complex64::new(0.5, EULER_GAMMA / PI - 1.0 / (2.0 * PI));
    pub const B2: Complex64 = Complex64::new(0.125, EULER_GAMMA / (4.0 * PI) - 3.0 / (16.0 * PI));
    pub const B3: Complex64 =
        Complex64::new(1.0 / 48.0, EULER_GAMMA / (24.0 * PI) - 11.0 / (288.0 * PI));
}

fn check_arg(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        domain(format!("argument must be positive and finite, got {t}"))
    }
}

/// `H_n^{(1)}(t) = J_n(t) + i Y_n(t)` for real `t > 0`.
pub fn hankel1(n: HankelOrder, t: f64) -> Result<Complex64> {
    check_arg(t)?;
    if t < SERIES_CROSSOVER {
        let (j, y) = series_jy(n.get(), t);
        Ok(Complex64::new(j, y))
    } else {
        Ok(asym_optimal(n, t))
    }
}

/// `(J_n(t), Y_n(t))` for real `t > 0`.
pub fn bessel_jy(n: HankelOrder, t: f64) -> Result<(f64, f64)> {
    let h = hankel1(n, t)?;
    Ok((h.re, h.im))
}

/// Small-argument expansion of `H_n^{(1)}(t)` without its remainder.
///
/// Intended for `t ≤ 0.1`; outside that window it is evaluated anyway but the
/// truncation error is no longer small.
pub fn hankel1_smallarg(n: HankelOrder, t: f64) -> Result<Complex64> {
    check_arg(t)?;
    let l = (0.5 * t).ln();
    let c = |x: f64| Complex64::new(0.0, x / PI);
    let v = match n.get() {
        0 => c(2.0 * l) + SmallArgConstants::B0,
        1 => c(-2.0 / t) + c(t * l) + SmallArgConstants::B1 * t,
        2 => c(-4.0 / (t * t)) - c(1.0) + c(0.25 * t * t * l) + SmallArgConstants::B2 * (t * t),
        _ => {
            let t3 = t * t * t;
            c(-16.0 / t3) - c(2.0 / t) - c(0.25 * t) + c(t3 * l / 24.0) + SmallArgConstants::B3 * t3
        }
    };
    Ok(v)
}

/// `(n, j) = (4n²-1)(4n²-9)···(4n²-(2j-1)²) / (2^{2j} j!)`, with `(n, 0) = 1`.
pub fn hankel_symbol(n: HankelOrder, j: usize) -> f64 {
    let mu = 4.0 * f64::from(n.get()).powi(2);
    (1..=j).fold(1.0, |acc, k| {
        let odd = (2 * k - 1) as f64;
        acc * (mu - odd * odd) / (4.0 * k as f64)
    })
}

/// Coefficients `a_j^{(n)} = (i/2)^j √(2/π) (n, j)` of the asymptotic expansion
/// `H_n^{(1)}(x) ~ x^{-1/2} e^{i(x-(n/2+1/4)π)} Σ_j a_j x^{-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymCoeffs {
    order: HankelOrder,
    coeffs: Vec<Complex64>,
}

impl AsymCoeffs {
    pub fn new(order: HankelOrder, max_j: usize) -> Self {
        let lead = (2.0 / PI).sqrt();
        let mut coeffs = Vec::with_capacity(max_j + 1);
        let mut pow = Complex64::new(1.0, 0.0);
        for j in 0..=max_j {
            coeffs.push(pow * lead * hankel_symbol(order, j));
            pow *= 0.5 * I;
        }
        Self { order, coeffs }
    }

    pub fn order(&self) -> HankelOrder {
        self.order
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

/// `H_{n,N}^{(1)}(x)`: the asymptotic expansion truncated after the `x^{-N}` term.
pub fn hankel1_asym(n: HankelOrder, big_n: usize, x: f64) -> Result<Complex64> {
    check_arg(x)?;
    let coeffs = AsymCoeffs::new(n, big_n);
    let inv = 1.0 / x;
    // Horner in 1/x
    let sum = coeffs
        .coeffs()
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * inv + a);
    Ok(sum * n.phase() * Complex64::from_polar(inv.sqrt(), x))
}

/// `|H_n^{(1)}(x) − H_{n,N}^{(1)}(x)|`, the truncation remainder of the asymptotic form.
pub fn asym_remainder(n: HankelOrder, big_n: usize, x: f64) -> Result<f64> {
    Ok((hankel1(n, x)? - hankel1_asym(n, big_n, x)?).norm())
}

/// `Γ_n(z, ω) = κ_s^n H_n^{(1)}(κ_s|z|) − κ_p^n H_n^{(1)}(κ_p|z|)` for `n ∈ {1, 2, 3}`.
pub fn gamma_n(
    n: HankelOrder,
    z: [f64; 2],
    medium: &ElasticMedium,
    omega: f64,
) -> Result<Complex64> {
    let (kp, ks) = medium.wavenumbers(omega)?;
    let r = z[0].hypot(z[1]);
    gamma_n_wavenumbers(n, r, kp, ks)
}

/// [`gamma_n`] with the distance and both wavenumbers supplied directly.
pub fn gamma_n_wavenumbers(
    n: HankelOrder,
    r: f64,
    kappa_p: f64,
    kappa_s: f64,
) -> Result<Complex64> {
    if n == HankelOrder::ZERO {
        return domain("Gamma_n is defined for n in {1,2,3}");
    }
    if r == 0.0 {
        return Err(Error::SingularPoint("Gamma_n at |z| = 0".into()));
    }
    check_arg(kappa_p)?;
    check_arg(kappa_s)?;
    let k = n.get() as i32;
    let (ts, tp) = (kappa_s * r, kappa_p * r);
    if ts < SERIES_CROSSOVER && tp < SERIES_CROSSOVER {
        // the leading singular terms are identical and cancel
        let (js, ys, _) = series_parts(n.get(), ts);
        let (jp, yp, _) = series_parts(n.get(), tp);
        let (ws, wp) = (kappa_s.powi(k), kappa_p.powi(k));
        return Ok(Complex64::new(ws * js - wp * jp, ws * ys - wp * yp));
    }
    Ok(kappa_s.powi(k) * hankel1(n, ts)? - kappa_p.powi(k) * hankel1(n, tp)?)
}

fn asym_optimal(n: HankelOrder, x: f64) -> Complex64 {
    let mu = 4.0 * f64::from(n.get()).powi(2);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut prev = 1.0;
    for j in 1..=ASYM_MAX_TERMS {
        let odd = (2 * j - 1) as f64;
        term *= 0.5 * I * ((mu - odd * odd) / (4.0 * j as f64 * x));
        let mag = term.norm();
        if mag >= prev {
            break;
        }
        sum += term;
        prev = mag;
        if mag < 1e-17 * sum.norm() {
            break;
        }
    }
    sum * n.phase() * Complex64::from_polar((2.0 / (PI * x)).sqrt(), x)
}

/// Ascending series for `(J_n(t), Y_n(t))` summed in double-double arithmetic.
fn series_jy(n: u32, t: f64) -> (f64, f64) {
    let (j, y_reg, y_lead) = series_parts(n, t);
    (j, y_reg + y_lead)
}

/// `(J_n, Y_n − L_n, L_n)` where `L_n(t) = −(n−1)!(2/t)^n/π` is the leading
/// singular term of `Y_n` (zero for `n = 0`). `t^n L_n(t)` does not depend on
/// `t`, which lets differences of scaled Hankel functions drop it exactly.
fn series_parts(n: u32, t: f64) -> (f64, f64, f64) {
    let half = 0.5 * t;
    let x2 = Dd::prod(half, half);

    let mut term = Dd::from(1.0);
    for k in 1..=n {
        term = term.mul_f64(half).div_f64(f64::from(k));
    }

    // harmonic numbers psi(p) and psi(p + n), extended term by term
    let mut psi_p = Dd::from(0.0);
    let mut psi_pn = (1..=n).fold(Dd::from(0.0), |acc, k| {
        acc + Dd::from(1.0).div_f64(f64::from(k))
    });

    let mut j_sum = Dd::from(0.0);
    let mut psi_sum = Dd::from(0.0);
    for p in 0..SERIES_MAX_TERMS {
        let weighted = term * (psi_p + psi_pn);
        j_sum = j_sum + term;
        psi_sum = psi_sum + weighted;
        if p > 0
            && term.abs() < SERIES_REL_TOL * j_sum.abs()
            && weighted.abs() <= SERIES_REL_TOL * psi_sum.abs()
        {
            break;
        }
        let pf = (p + 1) as f64;
        let npf = f64::from(n) + pf;
        term = -(term * x2).div_f64(pf * npf);
        psi_p = psi_p + Dd::from(1.0).div_f64(pf);
        psi_pn = psi_pn + Dd::from(1.0).div_f64(npf);
    }

    let finite_term = |p: u32| {
        let num: f64 = (1..=(n - 1 - p)).map(f64::from).product();
        let den: f64 = (1..=p).map(f64::from).product();
        num / den * (2.0 / t).powi(n as i32 - 2 * p as i32)
    };
    let (lead, rest) = if n == 0 {
        (0.0, 0.0)
    } else {
        (-finite_term(0) / PI, (1..n).map(finite_term).sum::<f64>())
    };

    let j = j_sum.to_f64();
    let y_reg = (2.0 / PI) * ((half.ln() + EULER_GAMMA) * j) - (rest + psi_sum.to_f64()) / PI;
    (j, y_reg, lead)
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    /// Exact product of two doubles.
    fn prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn mul_f64(self, b: f64) -> Self {
        let p = Self::prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p.hi, p.lo + self.lo * b);
        Self { hi, lo }
    }

    fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let p = Self::prod(q1, b);
        let (s, e) = two_sum(self.hi, -p.hi);
        let q2 = (s + (e - p.lo + self.lo)) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }
    }

    fn abs(self) -> f64 {
        self.hi.abs()
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl std::ops::Add for Dd {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl std::ops::Mul for Dd {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        let p = Self::prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi));
        Self { hi, lo }
    }
}

impl std::ops::Neg for Dd {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORDERS: [HankelOrder; 4] = [
        HankelOrder::ZERO,
        HankelOrder::ONE,
        HankelOrder::TWO,
        HankelOrder::THREE,
    ];

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    /// Plain f64 power series for J_n/Y_n, summed to convergence; only
    /// trustworthy for small-to-moderate arguments.
    fn naive_series(n: u32, t: f64) -> Complex64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        let psi = |k: u32| (1..=k).map(|j| 1.0 / f64::from(j)).sum::<f64>();
        let mut j = 0.0;
        let mut s = 0.0;
        for p in 0..40u32 {
            let c = (-1f64).powi(p as i32) / (fact(p) * fact(n + p))
                * (t / 2.0).powi((n + 2 * p) as i32);
            j += c;
            s += c * (psi(p + n) + psi(p));
        }
        let finite: f64 = (0..n)
            .map(|p| fact(n - 1 - p) / fact(p) * (2.0 / t).powi(n as i32 - 2 * p as i32))
            .sum();
        let y = 2.0 / PI * ((t / 2.0).ln() + EULER_GAMMA) * j - finite / PI - s / PI;
        Complex64::new(j, y)
    }

    #[test]
    fn h0_at_one_matches_series_oracle() {
        let h = hankel1(HankelOrder::ZERO, 1.0).unwrap();
        let oracle = naive_series(0, 1.0);
        assert!(rel(h, oracle) < 1e-13);
        assert!((h.re - 0.765_197_686_6).abs() < 1e-10);
        assert!((h.im - 0.088_256_964_2).abs() < 1e-10);
    }

    #[test]
    fn h1_small_argument_leading_term() {
        let t = 1e-3;
        let h = hankel1(HankelOrder::ONE, t).unwrap();
        let oracle = hankel1_smallarg(HankelOrder::ONE, t).unwrap();
        assert!(rel(h, oracle) < 1e-9);
        assert!((h.im - (-636.6198)).abs() < 1e-2);
        assert!((h.re - 5.0e-4).abs() < 1e-9);
        let lead = Complex64::new(0.0, -2.0 / (PI * t));
        assert!(rel(h, lead) < 1e-5);
    }

    #[test]
    fn h2_dominant_term_as_t_vanishes() {
        for t in [1e-3, 1e-4, 1e-5] {
            let h = hankel1(HankelOrder::TWO, t).unwrap();
            let lead = Complex64::new(0.0, -4.0 / (PI * t * t));
            assert!(rel(h, lead) < 2.0 * t * t, "t = {t}");
        }
    }

    #[test]
    fn series_agrees_with_plain_oracle_below_crossover() {
        for n in ORDERS {
            for t in [1e-6, 1e-3, 0.1, 0.5, 1.0, 2.404_825_557_695_773, 3.0, 5.0] {
                let h = hankel1(n, t).unwrap();
                let o = naive_series(n.get(), t);
                assert!(rel(h, o) < 1e-11, "n = {}, t = {t}: {h} vs {o}", n.get());
            }
        }
    }

    #[test]
    fn branches_agree_across_the_crossover() {
        for n in ORDERS {
            for t in [12.0, 13.0, 15.0, 18.0] {
                let (j, y) = series_jy(n.get(), t);
                let series = Complex64::new(j, y);
                let asym = asym_optimal(n, t);
                assert!(
                    rel(series, asym) < 1e-10,
                    "n = {}, t = {t}: {}",
                    n.get(),
                    rel(series, asym)
                );
            }
            let below = hankel1(n, SERIES_CROSSOVER * (1.0 - 1e-12)).unwrap();
            let above = hankel1(n, SERIES_CROSSOVER).unwrap();
            assert!(rel(below, above) < 1e-10);
        }
    }

    #[test]
    fn wronskian_identity() {
        for t in [0.5, 1.0, 5.0, 20.0] {
            for n in 0..3u32 {
                let (jn, yn) = bessel_jy(HankelOrder::new(n).unwrap(), t).unwrap();
                let (jn1, yn1) = bessel_jy(HankelOrder::new(n + 1).unwrap(), t).unwrap();
                let w = jn * yn1 - jn1 * yn;
                let expect = -2.0 / (PI * t);
                assert!(
                    ((w - expect) / expect).abs() < 1e-9,
                    "n = {n}, t = {t}: {w} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn derivative_recurrence_by_central_differences() {
        // d/dt[t^{-n} H_n(t)] = -t^{-n} H_{n+1}(t)
        let step = 1e-6;
        for n in 0..3u32 {
            let order = HankelOrder::new(n).unwrap();
            let next = HankelOrder::new(n + 1).unwrap();
            for t in [0.3, 1.0, 4.0, 11.0, 13.5, 40.0] {
                let g = |s: f64| hankel1(order, s).unwrap() * s.powi(-(n as i32));
                let fd = (g(t + step) - g(t - step)) / (2.0 * step);
                let exact = -hankel1(next, t).unwrap() * t.powi(-(n as i32));
                assert!(
                    rel(fd, exact) < 1e-6,
                    "n = {n}, t = {t}: {}",
                    rel(fd, exact)
                );
            }
        }
    }

    #[test]
    fn small_argument_expansions_track_hankel() {
        for n in ORDERS {
            for t in [1e-5, 1e-4, 1e-3, 5e-3, 9e-3] {
                let e = hankel1_smallarg(n, t).unwrap();
                let h = hankel1(n, t).unwrap();
                assert!(rel(e, h) < 1e-3, "n = {}, t = {t}", n.get());
            }
        }
        let h = hankel1_smallarg(HankelOrder::ZERO, 0.01).unwrap();
        assert!(rel(h, hankel1(HankelOrder::ZERO, 0.01).unwrap()) < 1e-3);
    }

    #[test]
    fn small_argument_forms_are_literal() {
        let t = 0.02;
        let h0 = hankel1_smallarg(HankelOrder::ZERO, t).unwrap();
        let expect = Complex64::new(0.0, 2.0 / PI * (t / 2.0).ln()) + SmallArgConstants::B0;
        assert!((h0 - expect).norm() < 1e-15);

        let t = 1e-4;
        let h3 = hankel1_smallarg(HankelOrder::THREE, t).unwrap();
        let lead = Complex64::new(0.0, -16.0 / (PI * t.powi(3)));
        assert!(rel(h3, lead) < 1e-6);
    }

    #[test]
    fn small_arg_constants_literal_values() {
        let g = EULER_GAMMA;
        assert!((SmallArgConstants::B0 - Complex64::new(1.0, 2.0 * g / PI)).norm() < 1e-16);
        let b3 = Complex64::new(1.0 / 48.0, g / (24.0 * PI) - 11.0 / (288.0 * PI));
        assert!((SmallArgConstants::B3 - b3).norm() < 1e-16);
    }

    #[test]
    fn single_term_asymptotics() {
        for x in [0.7, 5.0, 80.0] {
            let h = hankel1_asym(HankelOrder::ZERO, 0, x).unwrap();
            let expect = Complex64::from_polar((2.0 / (PI * x)).sqrt(), x - PI / 4.0);
            assert!((h - expect).norm() < 1e-14);
            let h = hankel1_asym(HankelOrder::ONE, 0, x).unwrap();
            let expect = Complex64::from_polar((2.0 / (PI * x)).sqrt(), x - 3.0 * PI / 4.0);
            assert!((h - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn more_terms_help_at_large_argument() {
        let exact = hankel1(HankelOrder::ZERO, 50.0).unwrap();
        let e2 = (exact - hankel1_asym(HankelOrder::ZERO, 2, 50.0).unwrap()).norm();
        let e0 = (exact - hankel1_asym(HankelOrder::ZERO, 0, 50.0).unwrap()).norm();
        assert!(e2 < e0);
    }

    #[test]
    fn first_asymptotic_correction_matches_known_value() {
        // H_0 ~ sqrt(2/(pi x)) e^{i(x - pi/4)} (1 - i/(8x) + ...)
        let a = AsymCoeffs::new(HankelOrder::ZERO, 1);
        let ratio = a.coeffs()[1] / a.coeffs()[0];
        assert!((ratio - Complex64::new(0.0, -0.125)).norm() < 1e-15);
        // (1, 1) = 3/4, so the ratio for n = 1 is 3i/8
        let a = AsymCoeffs::new(HankelOrder::ONE, 1);
        assert!((a.coeffs()[1] / a.coeffs()[0] - Complex64::new(0.0, 0.375)).norm() < 1e-15);
    }

    #[test]
    fn remainder_shrinks_with_argument() {
        assert!(
            asym_remainder(HankelOrder::ZERO, 0, 100.0).unwrap()
                < asym_remainder(HankelOrder::ZERO, 0, 10.0).unwrap()
        );
    }

    #[test]
    fn gamma_vanishes_for_equal_wavenumbers() {
        for n in [HankelOrder::ONE, HankelOrder::TWO, HankelOrder::THREE] {
            let g = gamma_n_wavenumbers(n, 0.37, 2.5, 2.5).unwrap();
            assert_eq!(g, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn gamma_small_distance_expansions() {
        let medium = ElasticMedium::new(2.0, 1.0).unwrap();
        let omega = 3.0;
        let (kp, ks) = medium.wavenumbers(omega).unwrap();
        let i = Complex64::new(0.0, 1.0);

        let r = 1e-3;
        let g2 = gamma_n(HankelOrder::TWO, [r, 0.0], &medium, omega).unwrap();
        let ln = |k: f64| (k * r / 2.0).ln();
        let b13 = i / (4.0 * PI) * (ks.powi(4) * ln(ks) - kp.powi(4) * ln(kp)) * r * r
            - i / PI * (ks * ks - kp * kp);
        assert!(rel(g2, b13) < 1e-2);

        let g1 = gamma_n(HankelOrder::ONE, [0.0, r], &medium, omega).unwrap();
        let b12 = i / PI * r * (ks * ks * ln(ks) - kp * kp * ln(kp))
            + SmallArgConstants::B1 * (ks * ks - kp * kp) * r;
        assert!(rel(g1, b12) < 1e-4);

        for r in [1e-3, 1e-4, 1e-5] {
            let g3 = gamma_n(HankelOrder::THREE, [r, 0.0], &medium, omega).unwrap();
            let lead = 2.0 * i / PI * (kp * kp - ks * ks) / r;
            assert!(rel(g3, lead) < 10.0 * r, "r = {r}");
        }
    }

    #[test]
    fn gamma_matches_plain_difference_at_moderate_distance() {
        for n in [HankelOrder::ONE, HankelOrder::TWO, HankelOrder::THREE] {
            for r in [0.05, 0.7, 3.0, 9.0] {
                let (kp, ks) = (1.3, 2.6);
                let g = gamma_n_wavenumbers(n, r, kp, ks).unwrap();
                let k = n.get() as i32;
                let plain = ks.powi(k) * hankel1(n, ks * r).unwrap()
                    - kp.powi(k) * hankel1(n, kp * r).unwrap();
                assert!(rel(g, plain) < 1e-9, "n = {}, r = {r}", n.get());
            }
        }
    }

    #[test]
    fn gamma_two_tends_to_constant() {
        // Gamma_2 -> -(i/pi)(ks^2 - kp^2) as |z| -> 0
        let (kp, ks) = (1.5, 3.0);
        let limit = Complex64::new(0.0, -(ks * ks - kp * kp) / PI);
        let g = gamma_n_wavenumbers(HankelOrder::TWO, 1e-7, kp, ks).unwrap();
        assert!(rel(g, limit) < 1e-10);
    }

    #[test]
    fn remainder_scaling_exponents() {
        for (n, big_n) in [(0u32, 0usize), (1, 0), (2, 0), (0, 2)] {
            let order = HankelOrder::new(n).unwrap();
            let xs: Vec<f64> = (0..25)
                .map(|k| 10f64 * 100f64.powf(k as f64 / 24.0))
                .collect();
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let ly: Vec<f64> = xs
                .iter()
                .map(|&x| asym_remainder(order, big_n, x).unwrap().ln())
                .collect();
            let mx = lx.iter().sum::<f64>() / 25.0;
            let my = ly.iter().sum::<f64>() / 25.0;
            let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
            let slope = sxy / sxx;
            let expect = -(big_n as f64 + 1.5);
            assert!(
                (slope - expect).abs() < 0.1,
                "(n, N) = ({n}, {big_n}): slope {slope}"
            );
        }
    }

    #[test]
    fn domain_errors() {
        assert!(hankel1(HankelOrder::ZERO, 0.0).is_err());
        assert!(hankel1(HankelOrder::ONE, -1.0).is_err());
        assert!(hankel1(HankelOrder::ONE, f64::INFINITY).is_err());
        assert!(hankel1_asym(HankelOrder::ONE, 3, 0.0).is_err());
        assert!(hankel1_smallarg(HankelOrder::TWO, -0.1).is_err());
        assert!(asym_remainder(HankelOrder::ZERO, 0, -2.0).is_err());
        assert!(HankelOrder::new(4).is_err());
        let medium = ElasticMedium::new(2.0, 1.0).unwrap();
        assert!(matches!(
            gamma_n(HankelOrder::ONE, [0.0, 0.0], &medium, 1.0),
            Err(Error::SingularPoint(_))
        ));
        assert!(gamma_n(HankelOrder::ZERO, [1.0, 0.0], &medium, 1.0).is_err());
    }
}
