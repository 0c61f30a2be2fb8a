//! Quadrature over a square cell containing a point singularity at its centre.

use std::f64::consts::FRAC_PI_4;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Product Gauss–Legendre rule on `[−h/2, h/2]²` in polar coordinates about the centre.
///
/// The square is split into four triangles with a vertex at the centre; on each
/// the radius is mapped as `r = R(θ) s²`, so integrands behaving like `ln r` or
/// `r^{-3/2}` become smooth in `s`.
#[derive(Debug, Clone)]
pub struct CellRule {
    points: Vec<([f64; 2], f64)>,
}

impl CellRule {
    pub fn new(h: f64, degree: usize) -> Self {
        let deg = NonZeroUsize::new(degree.max(1)).expect("nonzero");
        let gl = GaussLegendre::new(deg);
        let a = 0.5 * h;
        let mut points = Vec::with_capacity(4 * degree * degree);
        for quarter in 0..4 {
            let rot = f64::from(quarter) * 2.0 * FRAC_PI_4;
            for &(tn, tw) in gl.as_node_weight_pairs() {
                let theta = tn * FRAC_PI_4;
                let big_r = a / theta.cos();
                let (sin, cos) = (theta + rot).sin_cos();
                for &(sn, sw) in gl.as_node_weight_pairs() {
                    let s = 0.5 * (sn + 1.0);
                    let r = big_r * s * s;
                    // dθ = (π/4) dt, ds = ds'/2, r dr = 2R² s³ ds
                    let w = tw * FRAC_PI_4 * sw * 0.5 * 2.0 * big_r * big_r * s * s * s;
                    points.push(([r * cos, r * sin], w));
                }
            }
        }
        Self { points }
    }

    pub fn points(&self) -> &[([f64; 2], f64)] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_area_and_log() {
        let h = 0.3;
        let rule = CellRule::new(h, 16);
        let area: f64 = rule.points().iter().map(|p| p.1).sum();
        assert!((area - h * h).abs() < 1e-14);
        let log: f64 = rule
            .points()
            .iter()
            .map(|(z, w)| z[0].hypot(z[1]).ln() * w)
            .sum();
        let a = h / 2.0;
        let exact = 4.0 * a * a * (a.ln() + 0.5 * 2f64.ln() - 1.5 + FRAC_PI_4);
        assert!((log - exact).abs() < 1e-9, "{log} vs {exact}");
    }

    #[test]
    fn second_moments() {
        let h = 2.0;
        let rule = CellRule::new(h, 12);
        let xx: f64 = rule.points().iter().map(|(z, w)| z[0] * z[0] * w).sum();
        let xy: f64 = rule.points().iter().map(|(z, w)| z[0] * z[1] * w).sum();
        assert!((xx - 4.0 / 3.0).abs() < 1e-8);
        assert!(xy.abs() < 1e-14);
    }
}
