//! Material, stabilization, coupling and time-integration parameters.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    pub rho: f64,
    pub mu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PorosityMode {
    Constant,
    Constitutive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Permeability {
    /// Isotropic material permeability `K I`.
    Constant(f64),
    /// Kozeny–Carman law fitted at `(phi_ref, k_ref)`.
    KozenyCarman { k_ref: f64, phi_ref: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoroParams {
    /// Initial porosity φ̊.
    pub phi0: f64,
    pub permeability: Permeability,
    pub youngs: f64,
    pub poisson: f64,
    /// Bulk modulus of the volumetric energy.
    pub bulk: f64,
    /// Initial solid-phase density.
    pub rho_s0: f64,
    pub porosity_mode: PorosityMode,
}

impl PoroParams {
    pub fn lame_c(&self) -> f64 {
        self.youngs / (4.0 * (1.0 + self.poisson))
    }

    pub fn lame_beta(&self) -> f64 {
        self.poisson / (1.0 - 2.0 * self.poisson)
    }

    /// Initial permeability K̊ used by the stabilization.
    pub fn k0(&self) -> f64 {
        match self.permeability {
            Permeability::Constant(k) => k,
            Permeability::KozenyCarman { k_ref, phi_ref } => {
                k_ref * (1.0 - phi_ref * phi_ref) / phi_ref.powi(3) * self.phi0.powi(3) / (1.0 - self.phi0 * self.phi0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.phi0 > 0.0 && self.phi0 < 1.0) {
            return bad("initial porosity must lie in (0,1)");
        }
        if !(self.youngs > 0.0) {
            return bad("Young's modulus must be positive");
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return bad("Poisson ratio must lie in (-1, 0.5)");
        }
        if !(self.bulk > 0.0) {
            return bad("bulk modulus must be positive");
        }
        match self.permeability {
            Permeability::Constant(k) if !(k > 0.0) => bad("permeability must be positive"),
            Permeability::KozenyCarman { k_ref, phi_ref } if !(k_ref > 0.0 && phi_ref > 0.0 && phi_ref < 1.0) => {
                bad("Kozeny-Carman reference values out of range")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabConstants {
    pub gamma_p: f64,
    pub gamma_u: f64,
    pub gamma_div: f64,
    pub c_t: f64,
    pub c_k: f64,
    pub c_v: f64,
    pub gamma_nu_gp: f64,
    pub gamma_t_gp: f64,
    pub c_v_gamma: f64,
    pub c_t_gamma: f64,
}

impl Default for StabConstants {
    fn default() -> Self {
        StabConstants {
            gamma_p: 0.05,
            gamma_u: 0.05,
            gamma_div: 0.05e-3,
            c_t: 1.0 / 12.0,
            c_k: 1.0,
            c_v: 1.0 / 6.0,
            gamma_nu_gp: 0.1,
            gamma_t_gp: 0.001,
            c_v_gamma: 1.0 / 6.0,
            c_t_gamma: 1.0 / 12.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentialMethod {
    Substitution,
    Nitsche,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NitscheConfig {
    pub gamma_n: f64,
    pub gamma_t: f64,
    /// Adjoint sign, +1 or −1.
    pub zeta: f64,
    pub tangential: TangentialMethod,
    /// 1 for Beavers–Joseph, 0 for Beavers–Joseph–Saffman.
    pub beta_bj: f64,
    pub alpha_bj: f64,
}

impl Default for NitscheConfig {
    fn default() -> Self {
        NitscheConfig {
            gamma_n: 1.0 / 45.0,
            gamma_t: 1.0 / 45.0,
            zeta: -1.0,
            tangential: TangentialMethod::Nitsche,
            beta_bj: 1.0,
            alpha_bj: 1.0,
        }
    }
}

/// One-step-θ settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeParams {
    pub theta: f64,
    pub dt: f64,
}

impl TimeParams {
    pub fn theta_dt(&self) -> f64 {
        self.theta * self.dt
    }

    /// Rate at the new level from values and the stored rate at the old level.
    pub fn rate<T: crate::dual::Scalar>(&self, new: T, old: f64, old_rate: f64) -> T {
        (new - old) / self.theta_dt() - (1.0 - self.theta) / self.theta * old_rate
    }
}
