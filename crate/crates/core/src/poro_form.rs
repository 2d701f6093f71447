//! Finite-strain poroelastic residual on the Lagrangian mesh, its constitutive
//! laws and the poro interior penalty. Local unknown ordering per node `a`:
//! `(v_x, v_y, u_x, u_y, p)` at `5a..5a+5`.

use crate::dual::{det, inv, matmul, transpose, Scalar, M2};
use crate::error::{Error, Result};
use crate::fluid_form::FaceGeometry;
use crate::mesh::{edge_local, gauss_1d, gauss_2x2, shape_local_gradients, shape_values};
use crate::params::{FluidParams, Permeability, PorosityMode, PoroParams, StabConstants, TimeParams};

pub const VX: usize = 0;
pub const UX: usize = 2;
pub const P: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct Kinematics<T> {
    pub f: M2<T>,
    pub f_inv: M2<T>,
    pub j: T,
    pub e_gl: M2<T>,
    pub c_inv: M2<T>,
}

/// Plane-strain kinematics from the material displacement gradient.
pub fn kinematics<T: Scalar>(grad_u: M2<T>, element: usize) -> Result<Kinematics<T>> {
    let f = [[grad_u[0][0] + 1.0, grad_u[0][1]], [grad_u[1][0], grad_u[1][1] + 1.0]];
    let j = det(f);
    if !(j.re() > 0.0) {
        return Err(Error::ElementInversion { element });
    }
    let c = matmul(transpose(f), f);
    let e_gl = [[(c[0][0] - 1.0) * 0.5, c[0][1] * 0.5], [c[1][0] * 0.5, (c[1][1] - 1.0) * 0.5]];
    Ok(Kinematics { f, f_inv: inv(f), j, e_gl, c_inv: inv(c) })
}

/// Neo-Hookean skeleton stress plus the pore pressure contribution.
pub fn second_pk_stress<T: Scalar>(kin: &Kinematics<T>, p: T, prm: &PoroParams) -> M2<T> {
    let c = prm.lame_c();
    let beta = prm.lame_beta();
    let vol = kin.j.powf(-2.0 * beta) * (2.0 * c) + p * kin.j;
    let mut s = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            s[i][k] = -(vol * kin.c_inv[i][k]);
        }
        s[i][i] = s[i][i] + 2.0 * c;
    }
    s
}

/// Skeleton stored energy per reference volume, with unit out-of-plane stretch.
pub fn skeleton_energy(f: [[f64; 2]; 2], prm: &PoroParams) -> f64 {
    let c = prm.lame_c();
    let beta = prm.lame_beta();
    let tr = f[0][0].powi(2) + f[0][1].powi(2) + f[1][0].powi(2) + f[1][1].powi(2) + 1.0;
    let j = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    c * (tr - 3.0) + c / beta * (j.powf(-2.0 * beta) - 1.0)
}

/// Porosity condensed from the volumetric energy, or the initial value in constant mode.
pub fn porosity<T: Scalar>(j: T, p: T, prm: &PoroParams) -> Result<T> {
    if prm.porosity_mode == PorosityMode::Constant {
        return Ok(T::cst(prm.phi0));
    }
    let s0 = 1.0 - prm.phi0;
    let phi = -(j * (p * (s0 / prm.bulk) + 1.0)).recip() * s0 + 1.0;
    if !(phi.re() > 0.0 && phi.re() < 1.0) {
        return Err(Error::PorosityOutOfRange(phi.re()));
    }
    Ok(phi)
}

/// Kozeny–Carman material permeability for the current `Jφ`.
pub fn kozeny_carman<T: Scalar>(phi: T, j: T, k_ref: f64, phi_ref: f64) -> Result<T> {
    let jp = j * phi;
    if !(jp.re() < 1.0) {
        return Err(Error::PorositySaturation(jp.re()));
    }
    let scale = k_ref * (1.0 - phi_ref * phi_ref) / phi_ref.powi(3);
    Ok(jp * jp * jp * scale / (-(jp * jp) + 1.0))
}

pub fn material_permeability<T: Scalar>(phi: T, j: T, prm: &PoroParams) -> Result<T> {
    match prm.permeability {
        Permeability::Constant(k) => Ok(T::cst(k)),
        Permeability::KozenyCarman { k_ref, phi_ref } => kozeny_carman(phi, j, k_ref, phi_ref),
    }
}

/// `k = J⁻¹ F K Fᵀ` for isotropic `K`.
pub fn spatial_permeability<T: Scalar>(kin: &Kinematics<T>, k_mat: T) -> M2<T> {
    let b = matmul(kin.f, transpose(kin.f));
    let s = k_mat / kin.j;
    [[b[0][0] * s, b[0][1] * s], [b[1][0] * s, b[1][1] * s]]
}

/// `k⁻¹ = J K⁻¹ F⁻ᵀ F⁻¹`.
pub fn inverse_spatial_permeability<T: Scalar>(kin: &Kinematics<T>, k_mat: T) -> M2<T> {
    let a = matmul(transpose(kin.f_inv), kin.f_inv);
    let s = kin.j / k_mat;
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

/// Physical shape gradients and Jacobian determinant for scalar-valued nodal coordinates.
pub fn shape_gradients<T: Scalar>(coords: &[[T; 2]; 4], xi: [f64; 2]) -> ([[T; 2]; 4], T) {
    let g = shape_local_gradients(xi);
    let mut jac = [[T::zero(); 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            for k in 0..2 {
                jac[i][k] += coords[a][i] * g[a][k];
            }
        }
    }
    let d = det(jac);
    let ji = inv(jac);
    let mut dn = [[T::zero(); 2]; 4];
    for a in 0..4 {
        for i in 0..2 {
            dn[a][i] = ji[0][i] * g[a][0] + ji[1][i] * g[a][1];
        }
    }
    (dn, d)
}

/// Nodal history of one poro element at the previous time level.
#[derive(Clone, Copy, Debug, Default)]
pub struct PoroNodalHistory {
    pub v: [[f64; 2]; 4],
    pub v_rate: [[f64; 2]; 4],
    pub u: [[f64; 2]; 4],
    pub u_rate: [[f64; 2]; 4],
    pub u_acc: [[f64; 2]; 4],
    pub p: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct PoroElementData<'a> {
    pub element: usize,
    pub ref_coords: [[f64; 2]; 4],
    pub hist: PoroNodalHistory,
    /// Porosity and its rate at the 2×2 Gauss points, previous level.
    pub phi_old: [f64; 4],
    pub phi_rate_old: [f64; 4],
    /// Nodal `ρ b̂^{P,F}` and `ρ̃₀ b̂₀^{P,S}`.
    pub body_fluid: [[f64; 2]; 4],
    pub body_solid: [[f64; 2]; 4],
    /// Local edges carrying the boundary mass-flux term.
    pub flux_edges: &'a [usize],
}

/// Field values of a poro element at one local point.
pub(crate) struct PoroPoint<T> {
    pub(crate) n: [f64; 4],
    pub(crate) dn0: [[f64; 2]; 4],
    pub(crate) det0: f64,
    pub(crate) kin: Kinematics<T>,
    pub(crate) dn: [[T; 2]; 4],
    pub(crate) v: [T; 2],
    pub(crate) v_rate: [T; 2],
    pub(crate) grad_v: M2<T>,
    pub(crate) u_rate: [T; 2],
    pub(crate) u_acc: [T; 2],
    pub(crate) div_u_rate: T,
    pub(crate) p: T,
    pub(crate) grad_p: [T; 2],
    pub(crate) phi: T,
}

pub(crate) fn eval_point<T: Scalar>(d: &PoroElementData, prm: &PoroParams, ts: &TimeParams, x: &[T], xi: [f64; 2]) -> Result<PoroPoint<T>> {
    let n = shape_values(xi);
    let g = shape_local_gradients(xi);
    let c = &d.ref_coords;
    let mut jac = [[0.0; 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            for k in 0..2 {
                jac[i][k] += c[a][i] * g[a][k];
            }
        }
    }
    let det0 = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let ji = [[jac[1][1] / det0, -jac[0][1] / det0], [-jac[1][0] / det0, jac[0][0] / det0]];
    let mut dn0 = [[0.0; 2]; 4];
    for a in 0..4 {
        for i in 0..2 {
            dn0[a][i] = ji[0][i] * g[a][0] + ji[1][i] * g[a][1];
        }
    }
    let h = &d.hist;
    let mut grad_u = [[T::zero(); 2]; 2];
    let mut v = [T::zero(); 2];
    let mut v_rate = [T::zero(); 2];
    let mut u_rate = [T::zero(); 2];
    let mut u_acc = [T::zero(); 2];
    let mut p = T::zero();
    let mut u_rate_nodal = [[T::zero(); 2]; 4];
    for a in 0..4 {
        p += x[5 * a + P] * n[a];
        for i in 0..2 {
            let va = x[5 * a + VX + i];
            let ua = x[5 * a + UX + i];
            let ur = ts.rate(ua, h.u[a][i], h.u_rate[a][i]);
            u_rate_nodal[a][i] = ur;
            v[i] += va * n[a];
            v_rate[i] += ts.rate(va, h.v[a][i], h.v_rate[a][i]) * n[a];
            u_rate[i] += ur * n[a];
            u_acc[i] += ts.rate(ur, h.u_rate[a][i], h.u_acc[a][i]) * n[a];
            for k in 0..2 {
                grad_u[i][k] += ua * dn0[a][k];
            }
        }
    }
    let kin = kinematics(grad_u, d.element)?;
    let mut dn = [[T::zero(); 2]; 4];
    for a in 0..4 {
        for i in 0..2 {
            dn[a][i] = kin.f_inv[0][i] * dn0[a][0] + kin.f_inv[1][i] * dn0[a][1];
        }
    }
    let mut grad_v = [[T::zero(); 2]; 2];
    let mut grad_p = [T::zero(); 2];
    let mut div_u_rate = T::zero();
    for a in 0..4 {
        for i in 0..2 {
            grad_p[i] += x[5 * a + P] * dn[a][i];
            div_u_rate += u_rate_nodal[a][i] * dn[a][i];
            for k in 0..2 {
                grad_v[i][k] += x[5 * a + VX + i] * dn[a][k];
            }
        }
    }
    let phi = porosity(kin.j, p, prm)?;
    Ok(PoroPoint { n, dn0, det0, kin, dn, v, v_rate, grad_v, u_rate, u_acc, div_u_rate, p, grad_p, phi })
}

/// Porosity at the 2×2 Gauss points for the given nodal displacement and pressure.
pub fn gauss_porosity(ref_coords: &[[f64; 2]; 4], u: &[[f64; 2]; 4], p: &[f64; 4], prm: &PoroParams) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (q, &(xi, _)) in gauss_2x2().iter().enumerate() {
        let n = shape_values(xi);
        let g = shape_local_gradients(xi);
        let mut jac = [[0.0; 2]; 2];
        let mut gu = [[0.0; 2]; 2];
        for a in 0..4 {
            for i in 0..2 {
                for k in 0..2 {
                    jac[i][k] += ref_coords[a][i] * g[a][k];
                    gu[i][k] += u[a][i] * g[a][k];
                }
            }
        }
        // ∇₀u = (∂u/∂ξ) (∂X/∂ξ)⁻¹
        let ji = inv(jac);
        let grad = matmul(gu, ji);
        let kin = kinematics(grad, usize::MAX)?;
        let pq: f64 = (0..4).map(|a| n[a] * p[a]).sum();
        out[q] = porosity(kin.j, pq, prm)?;
    }
    Ok(out)
}

pub fn poro_element_residual<T: Scalar>(
    d: &PoroElementData,
    fl: &FluidParams,
    prm: &PoroParams,
    ts: &TimeParams,
    x: &[T],
    r: &mut [T],
) -> Result<()> {
    let rho = fl.rho;
    let mu = fl.mu;
    let rho_s = (1.0 - prm.phi0) * prm.rho_s0;
    for (q, &(xi, wq)) in gauss_2x2().iter().enumerate() {
        let s = eval_point(d, prm, ts, x, xi)?;
        let j = s.kin.j;
        let dv0 = s.det0 * wq;
        let dv = j * dv0;
        let phi_rate = ts.rate(s.phi, d.phi_old[q], d.phi_rate_old[q]);
        let k_mat = material_permeability(s.phi, j, prm)?;
        let kinv = inverse_spatial_permeability(&s.kin, k_mat);
        let w = [s.v[0] - s.u_rate[0], s.v[1] - s.u_rate[1]];
        let kw = [kinv[0][0] * w[0] + kinv[0][1] * w[1], kinv[1][0] * w[0] + kinv[1][1] * w[1]];
        let conv = [
            s.grad_v[0][0] * s.u_rate[0] + s.grad_v[0][1] * s.u_rate[1],
            s.grad_v[1][0] * s.u_rate[0] + s.grad_v[1][1] * s.u_rate[1],
        ];
        let stress = second_pk_stress(&s.kin, s.p, prm);
        let pk1 = matmul(s.kin.f, stress);
        let mut bf = [0.0; 2];
        let mut bs = [0.0; 2];
        for a in 0..4 {
            for i in 0..2 {
                bf[i] += s.n[a] * d.body_fluid[a][i];
                bs[i] += s.n[a] * d.body_solid[a][i];
            }
        }
        let mass = phi_rate + s.phi * s.div_u_rate;
        let drag_f = s.phi * mu;
        let drag_s = j * s.phi * s.phi * mu;
        let jphi = j * s.phi;
        for a in 0..4 {
            let na = s.n[a];
            let dn = s.dn[a];
            r[5 * a + P] += (mass * na - s.phi * (dn[0] * w[0] + dn[1] * w[1])) * dv;
            for i in 0..2 {
                let fv = (s.v_rate[i] - conv[i]) * (rho * na) - dn[i] * s.p + drag_f * kw[i] * na - T::cst(bf[i] * na);
                r[5 * a + VX + i] += fv * dv;
                let fu = s.u_acc[i] * (rho_s * na) + pk1[i][0] * s.dn0[a][0] + pk1[i][1] * s.dn0[a][1]
                    - drag_s * kw[i] * na
                    - jphi * s.grad_p[i] * na
                    - T::cst(bs[i] * na);
                r[5 * a + UX + i] += fu * dv0;
            }
        }
    }
    for &e in d.flux_edges {
        let a0 = e;
        let a1 = (e + 1) % 4;
        let cur = |a: usize, i: usize| x[5 * a + UX + i] + d.ref_coords[a][i];
        let dx = cur(a1, 0) - cur(a0, 0);
        let dy = cur(a1, 1) - cur(a0, 1);
        let len = (dx * dx + dy * dy).sqrt();
        let nrm = [dy / len, -dx / len];
        for &(g, gw) in &gauss_1d(3) {
            let xi = edge_local(e, 0.5 * (g + 1.0));
            let s = eval_point(d, prm, ts, x, xi)?;
            let wn = (s.v[0] - s.u_rate[0]) * nrm[0] + (s.v[1] - s.u_rate[1]) * nrm[1];
            let f = s.phi * wn * len * (0.5 * gw);
            for a in 0..4 {
                r[5 * a + P] += f * s.n[a];
            }
        }
    }
    Ok(())
}

/// `(τ_p^P, τ_div^P)` of a poro face.
pub fn poro_cip_parameters(h: f64, fl: &FluidParams, prm: &PoroParams, st: &StabConstants, ts: &TimeParams) -> (f64, f64) {
    let phi = h * h * (st.c_k * fl.mu * prm.phi0 / prm.k0() + st.c_t * fl.rho / ts.theta_dt());
    (st.gamma_p * h.powi(3) / phi, st.gamma_div * h * phi)
}

/// Poro interior penalty on one face, evaluated in the current configuration.
/// `x` holds 6 face nodes × 5 unknowns in the face slot numbering of `f`.
pub fn poro_face_residual<T: Scalar>(
    f: &FaceGeometry,
    fl: &FluidParams,
    prm: &PoroParams,
    st: &StabConstants,
    ts: &TimeParams,
    x: &[T],
    r: &mut [T],
) {
    let (tau_p, tau_div) = poro_cip_parameters(f.h, fl, prm, st, ts);
    let cur = |side: usize| -> [[T; 2]; 4] {
        let mut c = [[T::zero(); 2]; 4];
        for a in 0..4 {
            let k = f.slots[side][a];
            for i in 0..2 {
                c[a][i] = x[5 * k + UX + i] + f.coords[side][a][i];
            }
        }
        c
    };
    let coords = [cur(0), cur(1)];
    let (a0, a1) = (f.edge, (f.edge + 1) % 4);
    let ref_len = crate::mesh::dist(f.coords[0][a0], f.coords[0][a1]);
    let dx = coords[0][a1][0] - coords[0][a0][0];
    let dy = coords[0][a1][1] - coords[0][a0][1];
    let scale = (dx * dx + dy * dy).sqrt() / ref_len;
    for q in 0..3 {
        let mut gp_s = [[T::zero(); 2]; 6];
        for side in 0..2 {
            let sign = if side == 0 { 1.0 } else { -1.0 };
            let (dn, _) = shape_gradients(&coords[side], f.xi[side][q]);
            for a in 0..4 {
                let k = f.slots[side][a];
                for i in 0..2 {
                    gp_s[k][i] += dn[a][i] * sign;
                }
            }
        }
        let mut jp = [T::zero(); 2];
        let mut jdiv = T::zero();
        for k in 0..6 {
            for i in 0..2 {
                jp[i] += x[5 * k + P] * gp_s[k][i];
                jdiv += x[5 * k + VX + i] * gp_s[k][i];
            }
        }
        let w = scale * f.w[q];
        for k in 0..6 {
            r[5 * k + P] += (jp[0] * gp_s[k][0] + jp[1] * gp_s[k][1]) * w * tau_p;
            for i in 0..2 {
                r[5 * k + VX + i] += jdiv * gp_s[k][i] * w * tau_div;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;
    use crate::fluid_form::face_geometry;
    use crate::mesh::build_structured_mesh;
    use proptest::prelude::*;

    pub(crate) fn base_poro() -> PoroParams {
        PoroParams {
            phi0: 0.5,
            permeability: Permeability::Constant(0.1),
            youngs: 1000.0,
            poisson: 0.3,
            bulk: 100.0,
            rho_s0: 1.0,
            porosity_mode: PorosityMode::Constant,
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn kinematics_examples() {
        let k = kinematics([[0.0; 2]; 2], 0).unwrap();
        assert_eq!(k.j, 1.0);
        assert_eq!(k.e_gl, [[0.0; 2]; 2]);
        let k = kinematics([[0.1, 0.0], [0.0, 0.0]], 0).unwrap();
        assert!(close(k.j, 1.1, 1e-15));
        assert!(close(k.e_gl[0][0], 0.105, 1e-15));
        let a: f64 = 0.7;
        let k = kinematics([[a.cos() - 1.0, -a.sin()], [a.sin(), a.cos() - 1.0]], 0).unwrap();
        assert!(close(k.j, 1.0, 1e-15));
        assert!(k.e_gl.iter().flatten().all(|v| v.abs() < 1e-15));
        assert_eq!(kinematics([[-1.5, 0.0], [0.0, 0.0]], 7).unwrap_err(), Error::ElementInversion { element: 7 });
    }

    #[test]
    fn stress_examples() {
        let prm = base_poro();
        let id = kinematics([[0.0; 2]; 2], 0).unwrap();
        assert!(second_pk_stress(&id, 0.0, &prm).iter().flatten().all(|v| v.abs() < 1e-12));
        let s = second_pk_stress(&id, 2.5, &prm);
        assert!(close(s[0][0], -2.5, 1e-14) && close(s[1][1], -2.5, 1e-14) && s[0][1] == 0.0);
        // uniaxial stretch against the closed form of the energy derivative
        let k = kinematics([[0.1, 0.0], [0.0, 0.0]], 0).unwrap();
        let s = second_pk_stress(&k, 0.0, &prm);
        let c = 1000.0 / 5.2;
        let jb = 1.1f64.powf(-1.5);
        assert!(close(s[0][0], 2.0 * c * (1.0 - jb / 1.21), 1e-13));
        assert!(close(s[1][1], 2.0 * c * (1.0 - jb), 1e-13));
    }

    #[test]
    fn stress_matches_symbolic_reference() {
        // symbolic evaluation at F = [[1.1, 0.05], [0.02, 0.97]], p = 0.3 (scripts/derive_mms.py)
        let prm = base_poro();
        let k = kinematics([[0.1, 0.05], [0.02, -0.03]], 0).unwrap();
        let s = second_pk_stress(&k, 0.3, &prm);
        let oracle = SKELETON_ORACLE;
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(s[i][j], oracle[2 * i + j], 1e-12), "{s:?}");
            }
        }
    }

    const SKELETON_ORACLE: [f64; 4] = [94.233468873739185, 22.900587800697922, 22.900587800697922, 12.049907814782931];

    proptest! {
        #[test]
        fn stress_is_energy_gradient(a in -0.2f64..0.2, b in -0.2f64..0.2, c in -0.2f64..0.2, d in -0.2f64..0.2) {
            let prm = base_poro();
            let g = [[a, b], [c, d]];
            let k = kinematics(g, 0).unwrap();
            prop_assume!(k.j > 0.8 && k.j < 1.3);
            let s = second_pk_stress(&k, 0.0, &prm);
            // Ψ as a function of E through C = I + 2E and an F with FᵀF = C
            let psi = |e: [[f64; 2]; 2]| {
                let cm = [[1.0 + 2.0 * e[0][0], 2.0 * e[0][1]], [2.0 * e[1][0], 1.0 + 2.0 * e[1][1]]];
                let c = prm.lame_c();
                let beta = prm.lame_beta();
                let j = (cm[0][0] * cm[1][1] - cm[0][1] * cm[1][0]).sqrt();
                c * (cm[0][0] + cm[1][1] + 1.0 - 3.0) + c / beta * (j.powf(-2.0 * beta) - 1.0)
            };
            let eps = 1e-6;
            for (i, jj) in [(0, 0), (1, 1), (0, 1)] {
                let mut ep = k.e_gl;
                let mut em = k.e_gl;
                ep[i][jj] += eps;
                em[i][jj] -= eps;
                if i != jj {
                    ep[jj][i] += eps;
                    em[jj][i] -= eps;
                }
                let fd = (psi(ep) - psi(em)) / (2.0 * eps);
                let an = if i == jj { s[i][i] } else { s[0][1] + s[1][0] };
                prop_assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{} vs {}", fd, an);
            }
        }

        #[test]
        fn porosity_at_reference_state(phi0 in 0.01f64..0.99) {
            let mut prm = base_poro();
            prm.phi0 = phi0;
            prm.porosity_mode = PorosityMode::Constitutive;
            prop_assert!((porosity(1.0, 0.0, &prm).unwrap() - phi0).abs() < 1e-14);
        }

        #[test]
        fn spatial_permeability_spd(a in -0.3f64..0.3, b in -0.3f64..0.3, c in -0.3f64..0.3, d in -0.3f64..0.3) {
            let k = kinematics([[a, b], [c, d]], 0);
            prop_assume!(k.is_ok());
            let kin = k.unwrap();
            let kk = spatial_permeability(&kin, 0.1);
            prop_assert!((kk[0][1] - kk[1][0]).abs() < 1e-15);
            prop_assert!(kk[0][0] > 0.0 && det(kk) > 0.0);
            let ki = inverse_spatial_permeability(&kin, 0.1);
            let id = matmul(kk, ki);
            prop_assert!((id[0][0] - 1.0).abs() < 1e-12 && id[0][1].abs() < 1e-12);
        }
    }

    #[test]
    fn porosity_examples() {
        let mut prm = base_poro();
        assert_eq!(porosity(1.3, 4.0, &prm).unwrap(), 0.5);
        prm.porosity_mode = PorosityMode::Constitutive;
        assert!(close(porosity(1.0, 100.0, &prm).unwrap(), 2.0 / 3.0, 1e-14));
        assert!(close(porosity(2.0, 0.0, &prm).unwrap(), 0.75, 1e-14));
        assert!(matches!(porosity(0.4, 0.0, &prm), Err(Error::PorosityOutOfRange(_))));
    }

    #[test]
    fn kozeny_carman_examples() {
        assert!(close(kozeny_carman(0.25, 1.0, 0.1, 0.5).unwrap(), 0.01, 1e-14));
        assert!(close(kozeny_carman(0.25, 2.0, 0.1, 0.5).unwrap(), 0.1, 1e-14));
        let mut last = f64::INFINITY;
        for k in 1..20 {
            let v = kozeny_carman(0.5f64.powi(k), 1.0, 0.1, 0.5).unwrap();
            assert!(v < last && v > 0.0);
            last = v;
        }
        assert!(matches!(kozeny_carman(0.6, 2.0, 0.1, 0.5), Err(Error::PorositySaturation(_))));
    }

    #[test]
    fn spatial_permeability_examples() {
        let k = kinematics([[1.0, 0.0], [0.0, 0.0]], 0).unwrap();
        let kk = spatial_permeability(&k, 0.1);
        assert!(close(kk[0][0], 0.2, 1e-15) && close(kk[1][1], 0.05, 1e-15) && kk[0][1] == 0.0);
        let a: f64 = 0.4;
        let k = kinematics([[a.cos() - 1.0, -a.sin()], [a.sin(), a.cos() - 1.0]], 0).unwrap();
        let kk = spatial_permeability(&k, 0.1);
        assert!(close(kk[0][0], 0.1, 1e-14) && kk[0][1].abs() < 1e-15);
    }

    #[test]
    fn poro_cip_scaling_example() {
        let fl = FluidParams { rho: 1.0, mu: 1.0 };
        let ts = TimeParams { theta: 1.0, dt: 0.05 };
        let (tp, td) = poro_cip_parameters(0.1, &fl, &base_poro(), &StabConstants::default(), &ts);
        let phi = 0.01 * (5.0 + (1.0 / 12.0) / 0.05);
        assert!(close(tp, 0.05e-3 / phi, 1e-14));
        assert!(close(tp, 7.5e-4, 1e-14));
        assert!(close(td, 0.05e-3 * 0.1 * phi, 1e-14));
    }

    fn data(coords: [[f64; 2]; 4]) -> PoroElementData<'static> {
        PoroElementData {
            element: 0,
            ref_coords: coords,
            hist: PoroNodalHistory::default(),
            phi_old: [0.5; 4],
            phi_rate_old: [0.0; 4],
            body_fluid: [[0.0; 2]; 4],
            body_solid: [[0.0; 2]; 4],
            flux_edges: &[0, 1, 2, 3],
        }
    }

    const SKEW: [[f64; 2]; 4] = [[0.0, 0.0], [1.1, 0.1], [1.2, 0.9], [-0.1, 1.0]];

    #[test]
    fn zero_state_zero_residual() {
        let fl = FluidParams { rho: 1.0, mu: 1.0 };
        let ts = TimeParams { theta: 1.0, dt: 0.05 };
        let d = data(SKEW);
        let mut r = [0.0; 20];
        poro_element_residual(&d, &fl, &base_poro(), &ts, &[0.0; 20], &mut r).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13), "{r:?}");
    }

    #[test]
    fn internal_force_is_energy_gradient() {
        let fl = FluidParams { rho: 1.0, mu: 1.0 };
        let ts = TimeParams { theta: 1.0, dt: 0.05 };
        let prm = base_poro();
        let u = [[0.01, -0.02], [0.03, 0.01], [-0.02, 0.04], [0.0, 0.02]];
        let mut d = data(SKEW);
        d.hist.u = u;
        let mut x = [0.0; 20];
        for a in 0..4 {
            x[5 * a + UX] = u[a][0];
            x[5 * a + UX + 1] = u[a][1];
        }
        let mut r = [0.0; 20];
        poro_element_residual(&d, &fl, &prm, &ts, &x, &mut r).unwrap();
        let energy = |u: &[[f64; 2]; 4]| -> f64 {
            let mut e = 0.0;
            for &(xi, w) in gauss_2x2().iter() {
                let g = shape_local_gradients(xi);
                let mut jac = [[0.0; 2]; 2];
                let mut gu = [[0.0; 2]; 2];
                for a in 0..4 {
                    for i in 0..2 {
                        for k in 0..2 {
                            jac[i][k] += SKEW[a][i] * g[a][k];
                            gu[i][k] += u[a][i] * g[a][k];
                        }
                    }
                }
                let gr = matmul(gu, inv(jac));
                let f = [[1.0 + gr[0][0], gr[0][1]], [gr[1][0], 1.0 + gr[1][1]]];
                e += skeleton_energy(f, &prm) * det(jac) * w;
            }
            e
        };
        let eps = 1e-6;
        for a in 0..4 {
            for i in 0..2 {
                let mut up = u;
                let mut um = u;
                up[a][i] += eps;
                um[a][i] -= eps;
                let fd = (energy(&up) - energy(&um)) / (2.0 * eps);
                let an = r[5 * a + UX + i];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn element_jacobian_matches_differences() {
        let fl = FluidParams { rho: 1.0, mu: 0.7 };
        let ts = TimeParams { theta: 1.0, dt: 0.05 };
        let mut prm = base_poro();
        prm.porosity_mode = PorosityMode::Constitutive;
        prm.permeability = Permeability::KozenyCarman { k_ref: 0.1, phi_ref: 0.5 };
        let mut d = data(SKEW);
        d.hist.u = [[0.01, 0.0], [0.0, 0.02], [0.01, 0.01], [0.0, 0.0]];
        d.hist.v = [[0.1, 0.2], [0.0, -0.1], [0.3, 0.0], [0.1, 0.1]];
        let x0: Vec<f64> = (0..20).map(|k| 0.02 * ((k * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let xd = Dual::<20>::seed(&x0);
        let mut rd = [Dual::<20>::constant(0.0); 20];
        poro_element_residual(&d, &fl, &prm, &ts, &xd, &mut rd).unwrap();
        for c in 0..20 {
            let h = 1e-7;
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[c] += h;
            xm[c] -= h;
            let mut rp = [0.0; 20];
            let mut rm = [0.0; 20];
            poro_element_residual(&d, &fl, &prm, &ts, &xp, &mut rp).unwrap();
            poro_element_residual(&d, &fl, &prm, &ts, &xm, &mut rm).unwrap();
            for i in 0..20 {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let an = rd[i].d[c];
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "({i},{c}) {fd} vs {an}");
            }
        }
    }

    fn faces() -> (crate::mesh::Mesh, Vec<FaceGeometry>) {
        let m = build_structured_mesh([0.0, 0.0], [1.0, 1.0], 3, 3, 0.3).unwrap();
        let fs = m.all_faces();
        let g = fs
            .faces
            .iter()
            .zip(&fs.h)
            .map(|(&fi, &h)| {
                let f = &m.interior_faces[fi];
                face_geometry([m.elements[f.elements[0]], m.elements[f.elements[1]]], [m.coords(f.elements[0]), m.coords(f.elements[1])], f.local_edges, h)
            })
            .collect();
        (m, g)
    }

    #[test]
    fn poro_face_linear_fields_vanish_and_form_is_psd() {
        let fl = FluidParams { rho: 1.0, mu: 1.0 };
        let ts = TimeParams { theta: 1.0, dt: 0.05 };
        let prm = base_poro();
        let st = StabConstants::default();
        let (m, geo) = faces();
        for (fi, f) in geo.iter().enumerate() {
            let face = &m.interior_faces[fi];
            let mut x = [0.0; 30];
            for side in 0..2 {
                for a in 0..4 {
                    let q = m.nodes[m.elements[face.elements[side]][a]];
                    let k = f.slots[side][a];
                    // affine displacement keeps every field linear in the current frame
                    let u = [0.05 * q[0] - 0.02 * q[1], 0.01 * q[0] + 0.03 * q[1]];
                    let y = [q[0] + u[0], q[1] + u[1]];
                    x[5 * k] = 1.0 + y[0] - 2.0 * y[1];
                    x[5 * k + 1] = 0.5 * y[0] + y[1];
                    x[5 * k + UX] = u[0];
                    x[5 * k + UX + 1] = u[1];
                    x[5 * k + P] = 3.0 - y[0] + 0.25 * y[1];
                }
            }
            let mut r = [0.0; 30];
            poro_face_residual(f, &fl, &prm, &st, &ts, &x, &mut r);
            assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
        }
        // at zero displacement the form is bilinear in (v, p)
        let f = &geo[4];
        let xd = Dual::<30>::seed(&[0.0; 30]);
        let mut rd = [Dual::<30>::constant(0.0); 30];
        poro_face_residual(f, &fl, &prm, &st, &ts, &xd, &mut rd);
        for i in 0..30 {
            for j in 0..30 {
                if i % 5 != UX && i % 5 != UX + 1 && j % 5 != UX && j % 5 != UX + 1 {
                    assert!((rd[i].d[j] - rd[j].d[i]).abs() < 1e-14);
                }
            }
            if i % 5 != UX && i % 5 != UX + 1 {
                assert!(rd[i].d[i] >= 0.0);
            }
        }
    }
}
