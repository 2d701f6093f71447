//! Interface terms on the fluid-poro interface: Nitsche coupling in normal
//! direction and the Beavers–Joseph condition in tangential direction.
//!
//! Local unknowns of one interface point: the 12 unknowns of the background
//! fluid element followed by the 20 unknowns of the poro element.

use crate::dual::{trace, Scalar, M2};
use crate::error::{Error, Result};
use crate::mesh::map_quad;
use crate::params::{FluidParams, NitscheConfig, PoroParams, StabConstants, TangentialMethod, TimeParams};
use crate::poro_form::{self, PoroElementData, PoroNodalHistory, UX, VX};

/// Offset of the poro unknowns in the local interface vector.
pub const PORO: usize = 12;
pub const NDOF: usize = 32;

/// `κ = √(tr₃ k) / (α μ √3)` with `tr₃ = 3/2 tr₂`.
pub fn slip_coefficient<T: Scalar>(k: M2<T>, mu: f64, alpha: f64) -> Result<T> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha_bj must be positive".into()));
    }
    Ok((trace(k) * 1.5).sqrt() / (alpha * mu * 3f64.sqrt()))
}

/// `φ_Γ / (γ_n h_Γ)`.
pub fn normal_penalty<T: Scalar>(h: f64, vmax: T, fl: &FluidParams, st: &StabConstants, ts: &TimeParams, gamma_n: f64) -> T {
    let phi = vmax * (h * st.c_v_gamma * fl.rho) + (fl.mu + h * h * st.c_t_gamma * fl.rho / ts.theta_dt());
    phi / (gamma_n * h)
}

/// Adjoint prefactor (without ζ) and penalty prefactor of the tangential Nitsche terms.
pub fn tangential_factors<T: Scalar>(kappa: T, mu: f64, gamma_t: f64, h: f64) -> (T, T) {
    let den = kappa * mu + gamma_t * h;
    (den.recip() * (gamma_t * h), den.recip() * mu)
}

/// Prescribed interface jumps at one point; zero in the physical case.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jumps {
    pub g_sigma: [f64; 2],
    pub g_sigma_n: f64,
    pub g_n: [f64; 2],
    pub g_t: [f64; 2],
}

#[derive(Clone, Copy, Debug)]
pub struct InterfacePointData {
    pub fluid_coords: [[f64; 2]; 4],
    pub fluid_xi: [f64; 2],
    pub poro_element: usize,
    pub poro_ref_coords: [[f64; 2]; 4],
    pub poro_xi: [f64; 2],
    pub poro_hist: PoroNodalHistory,
    /// Fluid outward normal.
    pub normal: [f64; 2],
    pub w: f64,
    pub h_gamma: f64,
    pub jumps: Jumps,
}

/// Selects term groups; all enabled for assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub consistency: bool,
    pub adjoint: bool,
    pub penalty: bool,
    pub normal: bool,
    pub tangential: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { consistency: true, adjoint: true, penalty: true, normal: true, tangential: true };
}

/// Interface residual at one quadrature point.
#[allow(clippy::too_many_arguments)]
pub fn interface_residual<T: Scalar>(
    d: &InterfacePointData,
    cfg: &NitscheConfig,
    fl: &FluidParams,
    prm: &PoroParams,
    st: &StabConstants,
    ts: &TimeParams,
    terms: Terms,
    x: &[T],
    r: &mut [T],
) -> Result<()> {
    let mu = fl.mu;
    let n = d.normal;
    let w = d.w;
    let h = d.h_gamma;
    // fluid trace
    let fs = map_quad(&d.fluid_coords, d.fluid_xi);
    let mut vf = [T::zero(); 2];
    let mut gv = [[T::zero(); 2]; 2];
    let mut pf = T::zero();
    for a in 0..4 {
        pf += x[3 * a + 2] * fs.n[a];
        for i in 0..2 {
            vf[i] += x[3 * a + i] * fs.n[a];
            for k in 0..2 {
                gv[i][k] += x[3 * a + i] * fs.dn[a][k];
            }
        }
    }
    let mut sn = [T::zero(); 2];
    for i in 0..2 {
        sn[i] = -(pf * n[i]);
        for k in 0..2 {
            sn[i] += (gv[i][k] + gv[k][i]) * (mu * n[k]);
        }
    }
    let dnf: [f64; 4] = std::array::from_fn(|a| fs.dn[a][0] * n[0] + fs.dn[a][1] * n[1]);
    // poro trace
    let pd = PoroElementData {
        element: d.poro_element,
        ref_coords: d.poro_ref_coords,
        hist: d.poro_hist,
        phi_old: [0.0; 4],
        phi_rate_old: [0.0; 4],
        body_fluid: [[0.0; 2]; 4],
        body_solid: [[0.0; 2]; 4],
        flux_edges: &[],
    };
    let ps = poro_form::eval_point(&pd, prm, ts, &x[PORO..], d.poro_xi)?;
    let np = ps.n;
    let phi = ps.phi;
    let ud = ps.u_rate;
    let vp = ps.v;
    let j = jump_vector(vf, ud, vp, phi);

    let g = &d.jumps;
    if terms.normal {
        let s_n = sn[0] * n[0] + sn[1] * n[1];
        let c_n = (j[0] - g.g_n[0]) * n[0] + (j[1] - g.g_n[1]) * n[1];
        if terms.consistency {
            let gsn = g.g_sigma[0] * n[0] + g.g_sigma[1] * n[1];
            for a in 0..4 {
                for i in 0..2 {
                    let t = s_n * (n[i] * w);
                    r[PORO + 5 * a + VX + i] += (t - T::cst(g.g_sigma_n * n[i] * w)) * np[a];
                    r[PORO + 5 * a + UX + i] += (t - T::cst(gsn * n[i] * w)) * np[a];
                    r[3 * a + i] -= t * fs.n[a];
                }
            }
        }
        if terms.adjoint {
            for a in 0..4 {
                r[3 * a + 2] -= c_n * (fs.n[a] * w);
                for i in 0..2 {
                    r[3 * a + i] -= c_n * (cfg.zeta * 2.0 * mu * n[i] * dnf[a] * w);
                }
            }
        }
        if terms.penalty {
            let vmax = vf[0].abs().max_of(vf[1].abs());
            let pen = normal_penalty(h, vmax, fl, st, ts, cfg.gamma_n) * c_n * w;
            for a in 0..4 {
                for i in 0..2 {
                    r[3 * a + i] += pen * (fs.n[a] * n[i]);
                    r[PORO + 5 * a + VX + i] -= pen * (np[a] * n[i]);
                    r[PORO + 5 * a + UX + i] -= pen * (np[a] * n[i]);
                }
            }
        }
    }
    if terms.tangential {
        let proj = |v: [T; 2]| -> [T; 2] {
            let vn = v[0] * n[0] + v[1] * n[1];
            [v[0] - vn * n[0], v[1] - vn * n[1]]
        };
        let gs_t = {
            let gn = g.g_sigma[0] * n[0] + g.g_sigma[1] * n[1];
            [g.g_sigma[0] - gn * n[0], g.g_sigma[1] - gn * n[1]]
        };
        let k_mat = poro_form::material_permeability(phi, ps.kin.j, prm)?;
        let kappa = slip_coefficient(poro_form::spatial_permeability(&ps.kin, k_mat), mu, cfg.alpha_bj)?;
        let seep = [vf[0] - ud[0] - (vp[0] - ud[0]) * phi * cfg.beta_bj, vf[1] - ud[1] - (vp[1] - ud[1]) * phi * cfg.beta_bj];
        if terms.consistency {
            for a in 0..4 {
                for i in 0..2 {
                    r[PORO + 5 * a + UX + i] -= T::cst(gs_t[i] * w * np[a]);
                }
            }
        }
        match cfg.tangential {
            TangentialMethod::Substitution => {
                if terms.penalty {
                    if !(kappa.re() > 0.0) {
                        return Err(Error::SubstitutionNoSlip);
                    }
                    let b = proj([seep[0] - g.g_t[0], seep[1] - g.g_t[1]]);
                    let inv_k = kappa.recip() * w;
                    for a in 0..4 {
                        for i in 0..2 {
                            r[3 * a + i] += b[i] * inv_k * fs.n[a];
                            r[PORO + 5 * a + UX + i] -= b[i] * inv_k * np[a];
                        }
                    }
                }
            }
            TangentialMethod::Nitsche => {
                let st_ = proj(sn);
                if terms.consistency {
                    for a in 0..4 {
                        for i in 0..2 {
                            r[PORO + 5 * a + UX + i] += st_[i] * (np[a] * w);
                            r[3 * a + i] -= st_[i] * (fs.n[a] * w);
                        }
                    }
                }
                let b = proj([seep[0] + kappa * sn[0] - g.g_t[0], seep[1] + kappa * sn[1] - g.g_t[1]]);
                let (adj, pen) = tangential_factors(kappa, mu, cfg.gamma_t, h);
                if terms.adjoint {
                    let s = adj * (cfg.zeta * -2.0 * mu * w * 0.5);
                    for a in 0..4 {
                        let bdn = b[0] * fs.dn[a][0] + b[1] * fs.dn[a][1];
                        for i in 0..2 {
                            r[3 * a + i] += s * (b[i] * dnf[a] + bdn * n[i]);
                        }
                    }
                }
                if terms.penalty {
                    let s = pen * w;
                    for a in 0..4 {
                        for i in 0..2 {
                            r[3 * a + i] += s * b[i] * fs.n[a];
                            r[PORO + 5 * a + UX + i] -= s * b[i] * np[a];
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// `v^F − u̇ − φ(v^P − u̇)`.
fn jump_vector<T: Scalar>(vf: [T; 2], ud: [T; 2], vp: [T; 2], phi: T) -> [T; 2] {
    [vf[0] - ud[0] - phi * (vp[0] - ud[0]), vf[1] - ud[1] - phi * (vp[1] - ud[1])]
}

/// Unprojected stress exchange `(δu − δv^F, σ^F n) − (δu, g_σ)` together with the
/// projected poro-fluid part; used to check the split into normal and tangential parts.
pub fn unprojected_consistency(d: &InterfacePointData, mu: f64, x: &[f64], r: &mut [f64]) {
    let n = d.normal;
    let w = d.w;
    let fs = map_quad(&d.fluid_coords, d.fluid_xi);
    let mut gv = [[0.0; 2]; 2];
    let mut pf = 0.0;
    for a in 0..4 {
        pf += x[3 * a + 2] * fs.n[a];
        for i in 0..2 {
            for k in 0..2 {
                gv[i][k] += x[3 * a + i] * fs.dn[a][k];
            }
        }
    }
    let mut sn = [0.0; 2];
    for i in 0..2 {
        sn[i] = -pf * n[i] + (0..2).map(|k| mu * (gv[i][k] + gv[k][i]) * n[k]).sum::<f64>();
    }
    let s_n = sn[0] * n[0] + sn[1] * n[1];
    let np = crate::mesh::shape_values(d.poro_xi);
    let g = &d.jumps;
    for a in 0..4 {
        for i in 0..2 {
            r[3 * a + i] -= sn[i] * fs.n[a] * w;
            r[PORO + 5 * a + UX + i] += (sn[i] - g.g_sigma[i]) * np[a] * w;
            r[PORO + 5 * a + VX + i] += (s_n - g.g_sigma_n) * n[i] * np[a] * w;
        }
    }
}
