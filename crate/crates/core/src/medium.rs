use crate::error::{domain, Result};

/// Homogeneous isotropic background described by its Lamé pair.
///
/// Units are nondimensional; the slownesses are `c_p = (λ+2μ)^{-1/2}` and
/// `c_s = μ^{-1/2}`, so that `κ_p = c_p ω < κ_s = c_s ω` for every frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticMedium {
    lambda: f64,
    mu: f64,
}

impl ElasticMedium {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu.is_finite()) {
            return domain(format!("non-finite Lamé pair ({lambda}, {mu})"));
        }
        if mu <= 0.0 {
            return domain(format!("shear modulus must be positive, got mu = {mu}"));
        }
        if lambda + mu <= 0.0 {
            return domain(format!("lambda + mu must be positive, got {}", lambda + mu));
        }
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Compressional slowness `(λ+2μ)^{-1/2}`.
    pub fn c_p(&self) -> f64 {
        (self.lambda + 2.0 * self.mu).powf(-0.5)
    }

    /// Shear slowness `μ^{-1/2}`.
    pub fn c_s(&self) -> f64 {
        self.mu.powf(-0.5)
    }

    /// `(κ_p, κ_s)` at angular frequency `omega`.
    pub fn wavenumbers(&self, omega: f64) -> Result<(f64, f64)> {
        if !(omega > 0.0 && omega.is_finite()) {
            return domain(format!(
                "frequency must be positive and finite, got {omega}"
            ));
        }
        Ok((self.c_p() * omega, self.c_s() * omega))
    }

    /// Shear wavelength `2π/κ_s`.
    pub fn shear_wavelength(&self, omega: f64) -> Result<f64> {
        let (_, ks) = self.wavenumbers(omega)?;
        Ok(2.0 * std::f64::consts::PI / ks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_by_substitution() {
        let m = ElasticMedium::new(2.0, 1.0).unwrap();
        let (kp, ks) = m.wavenumbers(3.0).unwrap();
        assert!((kp - 1.5).abs() < 1e-15);
        assert!((ks - 3.0).abs() < 1e-15);

        let m = ElasticMedium::new(1.0, 1.0).unwrap();
        let (kp, ks) = m.wavenumbers(1.0).unwrap();
        assert!((kp - 3f64.powf(-0.5)).abs() < 1e-15);
        assert!((ks - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wavenumber_ratio_is_frequency_independent() {
        let m = ElasticMedium::new(0.7, 2.3).unwrap();
        let r0 = {
            let (kp, ks) = m.wavenumbers(1.0).unwrap();
            kp / ks
        };
        for w in [0.5, 3.0, 17.0, 250.0] {
            let (kp, ks) = m.wavenumbers(w).unwrap();
            assert!(kp < ks);
            assert!((kp / ks - r0).abs() < 1e-14);
            assert!((kp / ks - m.c_p() / m.c_s()).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_invalid_lame_pairs() {
        assert!(ElasticMedium::new(1.0, 0.0).is_err());
        assert!(ElasticMedium::new(-2.0, 1.0).is_err());
        assert!(ElasticMedium::new(f64::NAN, 1.0).is_err());
        let m = ElasticMedium::new(2.0, 1.0).unwrap();
        assert!(m.wavenumbers(0.0).is_err());
        assert!(m.wavenumbers(-1.0).is_err());
    }
}
