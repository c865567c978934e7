use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::FemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstitutiveModel {
    /// Small-strain isotropic Hooke law, used for verification.
    LinearElastic,
    /// Compressible Neo-Hookean: psi = mu/2 (I1 - 3) - mu ln J + lambda/2 (ln J)^2.
    NeoHookean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// kg/m^3
    pub density: f64,
    pub model: ConstitutiveModel,
    /// Pa
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    /// Coulomb coefficient against rigid pads.
    pub friction: f64,
    /// Mass-proportional Rayleigh damping, 1/s.
    #[serde(default)]
    pub rayleigh_mass_damping: f64,
}

impl Material {
    pub fn neo_hookean(density: f64, young_modulus: f64, poisson_ratio: f64) -> Self {
        Self {
            density,
            model: ConstitutiveModel::NeoHookean,
            young_modulus,
            poisson_ratio,
            friction: 0.0,
            rayleigh_mass_damping: 0.0,
        }
    }

    pub fn linear_elastic(density: f64, young_modulus: f64, poisson_ratio: f64) -> Self {
        Self { model: ConstitutiveModel::LinearElastic, ..Self::neo_hookean(density, young_modulus, poisson_ratio) }
    }

    pub fn with_friction(mut self, mu: f64) -> Self {
        self.friction = mu;
        self
    }

    pub fn with_damping(mut self, c_m: f64) -> Self {
        self.rayleigh_mass_damping = c_m;
        self
    }

    /// Checks the parameter ranges; the error names the offending field.
    pub fn validate(&self) -> Result<(), FemError> {
        let bad = |field: &str, v: f64| Err(FemError::Configuration(format!("material {field} out of range: {v}")));
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density", self.density);
        }
        if !(self.young_modulus > 0.0 && self.young_modulus.is_finite()) {
            return bad("young_modulus", self.young_modulus);
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return bad("poisson_ratio", self.poisson_ratio);
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return bad("friction", self.friction);
        }
        if !(self.rayleigh_mass_damping >= 0.0 && self.rayleigh_mass_damping.is_finite()) {
            return bad("rayleigh_mass_damping", self.rayleigh_mass_damping);
        }
        Ok(())
    }

    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young_modulus, self.poisson_ratio);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// Constrained (P-wave) modulus lambda + 2 mu.
    pub fn constrained_modulus(&self) -> f64 {
        let nu = self.poisson_ratio;
        self.young_modulus * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// Dilatational wave speed sqrt((lambda + 2 mu) / rho).
    pub fn wave_speed(&self) -> f64 {
        (self.constrained_modulus() / self.density).sqrt()
    }

    /// Wave speed used by the timestep bound, sqrt((3 lambda + 2 mu) / rho).
    ///
    /// A fully integrated hex with lumped mass has its highest mode in uniform
    /// dilatation, stiffened by 3K = 3 lambda + 2 mu rather than lambda + 2 mu;
    /// with this speed V / A_max / c is the exact limit for a cube. Equals
    /// the dilatational speed when nu = 0.
    pub fn cfl_wave_speed(&self) -> f64 {
        let (lambda, mu) = self.lame();
        ((3.0 * lambda + 2.0 * mu) / self.density).sqrt()
    }
}

fn small_strain(f: &Matrix3<f64>) -> Matrix3<f64> {
    let g = f - Matrix3::identity();
    0.5 * (g + g.transpose())
}

fn check_det(f: &Matrix3<f64>) -> Result<f64, FemError> {
    let j = f.determinant();
    if j > 0.0 && j.is_finite() {
        Ok(j)
    } else {
        Err(FemError::ElementInversion { element: None, det: j })
    }
}

/// Cauchy stress for deformation gradient `f`.
pub fn stress(f: &Matrix3<f64>, material: &Material) -> Result<Matrix3<f64>, FemError> {
    let j = check_det(f)?;
    let (lambda, mu) = material.lame();
    let i = Matrix3::identity();
    Ok(match material.model {
        ConstitutiveModel::LinearElastic => {
            let eps = small_strain(f);
            i * (lambda * eps.trace()) + eps * (2.0 * mu)
        }
        ConstitutiveModel::NeoHookean => {
            let b = f * f.transpose();
            (b - i) * (mu / j) + i * (lambda * j.ln() / j)
        }
    })
}

/// First Piola-Kirchhoff stress, the work conjugate of F used for reference-configuration
/// force integration. The linear model uses the small-strain stress directly.
pub fn first_piola(f: &Matrix3<f64>, material: &Material) -> Result<Matrix3<f64>, FemError> {
    let j = check_det(f)?;
    let (lambda, mu) = material.lame();
    Ok(match material.model {
        ConstitutiveModel::LinearElastic => {
            let eps = small_strain(f);
            Matrix3::identity() * (lambda * eps.trace()) + eps * (2.0 * mu)
        }
        ConstitutiveModel::NeoHookean => {
            let f_inv_t = f.try_inverse().ok_or(FemError::ElementInversion { element: None, det: j })?.transpose();
            (f - f_inv_t) * mu + f_inv_t * (lambda * j.ln())
        }
    })
}

/// Strain energy per unit reference volume.
pub fn strain_energy_density(f: &Matrix3<f64>, material: &Material) -> Result<f64, FemError> {
    let j = check_det(f)?;
    let (lambda, mu) = material.lame();
    Ok(match material.model {
        ConstitutiveModel::LinearElastic => {
            let eps = small_strain(f);
            0.5 * lambda * eps.trace().powi(2) + mu * eps.component_mul(&eps).sum()
        }
        ConstitutiveModel::NeoHookean => {
            let lnj = j.ln();
            0.5 * mu * (f.component_mul(f).sum() - 3.0) - mu * lnj + 0.5 * lambda * lnj * lnj
        }
    })
}
