//! Cut Navier–Stokes residual: Galerkin terms, continuous interior penalty and
//! ghost penalty. Local unknown ordering per node `a`: `(v_x, v_y, p)` at `3a..3a+3`.

use crate::cutgeom::QuadPoint;
use crate::dual::Scalar;
use crate::mesh::{edge_local, gauss_1d, map_quad, shape_hessians};
use crate::params::{FluidParams, StabConstants, TimeParams};

/// Element data for the Galerkin terms.
#[derive(Clone, Debug)]
pub struct FluidElementData<'a> {
    pub coords: [[f64; 2]; 4],
    pub quad: &'a [QuadPoint],
    pub v_old: [[f64; 2]; 4],
    pub a_old: [[f64; 2]; 4],
    /// Nodal values of ρ b̂ at the new time level.
    pub body: [[f64; 2]; 4],
}

pub fn fluid_element_residual<T: Scalar>(
    d: &FluidElementData,
    prm: &FluidParams,
    ts: &TimeParams,
    x: &[T],
    r: &mut [T],
) {
    let (rho, mu) = (prm.rho, prm.mu);
    for q in d.quad {
        let s = map_quad(&d.coords, q.xi);
        let mut v = [T::zero(); 2];
        let mut acc = [T::zero(); 2];
        let mut g = [[T::zero(); 2]; 2];
        let mut p = T::zero();
        let mut b = [0.0; 2];
        for a in 0..4 {
            let na = s.n[a];
            p += x[3 * a + 2] * na;
            for i in 0..2 {
                let va = x[3 * a + i];
                v[i] += va * na;
                acc[i] += ts.rate(va, d.v_old[a][i], d.a_old[a][i]) * na;
                b[i] += d.body[a][i] * na;
                for j in 0..2 {
                    g[i][j] += va * s.dn[a][j];
                }
            }
        }
        let div = g[0][0] + g[1][1];
        let conv = [g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]];
        let eps = [[g[0][0], (g[0][1] + g[1][0]) * 0.5], [(g[0][1] + g[1][0]) * 0.5, g[1][1]]];
        for a in 0..4 {
            let (na, dn) = (s.n[a], s.dn[a]);
            for i in 0..2 {
                let val = (acc[i] + conv[i]) * (rho * na) - p * dn[i]
                    + (eps[i][0] * dn[0] + eps[i][1] * dn[1]) * (2.0 * mu)
                    - T::cst(b[i] * na);
                r[3 * a + i] += val * q.w;
            }
            r[3 * a + 2] += div * (na * q.w);
        }
    }
}

/// Neumann traction on a cut boundary point: adds `−(δv, ĥ)`.
pub fn fluid_neumann_residual(shape: &[f64; 4], w: f64, traction: [f64; 2], r: &mut [f64]) {
    for a in 0..4 {
        for i in 0..2 {
            r[3 * a + i] -= shape[a] * traction[i] * w;
        }
    }
}

/// Interior penalty parameters of one face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidStabParams<T> {
    pub phi: T,
    pub tau_u: T,
    pub tau_p: T,
    pub tau_div: T,
}

/// Face scalings `Φ`, `τ_u`, `τ_p`, `τ_div` for a face of size `h` and nodal velocity bound `vmax`.
pub fn cip_parameters<T: Scalar>(
    h: f64,
    vmax: T,
    prm: &FluidParams,
    st: &StabConstants,
    ts: &TimeParams,
) -> FluidStabParams<T> {
    let rho = prm.rho;
    let phi = vmax * (h * st.c_v * rho) + (prm.mu + h * h * st.c_t * rho / ts.theta_dt());
    let rv = vmax * rho;
    FluidStabParams {
        phi,
        tau_u: rv * rv * (st.gamma_u * h.powi(3)) / phi,
        tau_p: phi.recip() * (st.gamma_p * h.powi(3)),
        tau_div: phi * (st.gamma_div * h),
    }
}

/// Ghost-penalty parameters `(τ_u^{GP,1}, τ_u^{GP,2}, τ_p^{GP,1}, τ_p^{GP,2}, τ_div^{GP,1})`.
pub fn ghost_parameters<T: Scalar>(
    h: f64,
    cip: &FluidStabParams<T>,
    prm: &FluidParams,
    st: &StabConstants,
    ts: &TimeParams,
) -> [T; 5] {
    let tu1 = cip.tau_u + (st.gamma_nu_gp * h * prm.mu + st.gamma_t_gp * h.powi(3) * prm.rho / ts.theta_dt());
    let tu2 = (tu1 + cip.tau_div) * (0.05 * h * h);
    let tp1 = cip.tau_p;
    let tp2 = tp1 * (0.05 * h * h);
    [tu1, tu2, tp1, tp2, cip.tau_div]
}

/// Geometry of a face between two elements, prepared once per topology.
#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub coords: [[[f64; 2]; 4]; 2],
    /// Slot (0..6) of each element's local node in the face-local numbering.
    pub slots: [[usize; 4]; 2],
    /// Global node of each slot.
    pub nodes: [usize; 6],
    pub xi: [[[f64; 2]; 3]; 2],
    pub w: [f64; 3],
    /// Unit normal pointing out of the first element.
    pub normal: [f64; 2],
    pub h: f64,
    /// Local edge of the first element.
    pub edge: usize,
}

/// Builds face quadrature (3-point Gauss) and the node slot map.
pub fn face_geometry(
    elems: [[usize; 4]; 2],
    coords: [[[f64; 2]; 4]; 2],
    local_edges: [usize; 2],
    h: f64,
) -> FaceGeometry {
    let mut nodes: Vec<usize> = elems[0].to_vec();
    for &n in &elems[1] {
        if !nodes.contains(&n) {
            nodes.push(n);
        }
    }
    assert_eq!(nodes.len(), 6, "face elements must share exactly one edge");
    let slots = elems.map(|el| el.map(|n| nodes.iter().position(|&m| m == n).unwrap()));
    let le0 = local_edges[0];
    let le1 = local_edges[1];
    let a = coords[0][le0];
    let b = coords[0][(le0 + 1) % 4];
    let len = crate::mesh::dist(a, b);
    let normal = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
    // the second element traverses the shared edge in the opposite direction
    let mut xi = [[[0.0; 2]; 3]; 2];
    let mut w = [0.0; 3];
    for (k, &(g, gw)) in gauss_1d(3).iter().enumerate() {
        let s = 0.5 * (g + 1.0);
        xi[0][k] = edge_local(le0, s);
        xi[1][k] = edge_local(le1, 1.0 - s);
        w[k] = 0.5 * gw * len;
    }
    let nodes = [nodes[0], nodes[1], nodes[2], nodes[3], nodes[4], nodes[5]];
    FaceGeometry { coords, slots, nodes, xi, w, normal, h, edge: le0 }
}

/// Face residual for CIP and, if `ghost`, the ghost penalty. `x` holds 6 nodes × 3.
pub fn fluid_face_residual<T: Scalar>(
    f: &FaceGeometry,
    ghost: bool,
    prm: &FluidParams,
    st: &StabConstants,
    ts: &TimeParams,
    x: &[T],
    r: &mut [T],
) {
    let mut vmax = T::zero();
    for k in 0..6 {
        vmax = vmax.max_of(x[3 * k].abs()).max_of(x[3 * k + 1].abs());
    }
    let cip = cip_parameters(f.h, vmax, prm, st, ts);
    let gp = if ghost { Some(ghost_parameters(f.h, &cip, prm, st, ts)) } else { None };
    let n = f.normal;
    for q in 0..3 {
        // per-slot normal derivative, second normal derivative (signed by side)
        let mut dn_s = [0.0; 6];
        let mut d2_s = [0.0; 6];
        let mut dv_s = [[0.0; 2]; 6];
        for side in 0..2 {
            let sign = if side == 0 { 1.0 } else { -1.0 };
            let s = map_quad(&f.coords[side], f.xi[side][q]);
            let hs = if ghost { shape_hessians(&f.coords[side], f.xi[side][q]) } else { [[[0.0; 2]; 2]; 4] };
            for a in 0..4 {
                let k = f.slots[side][a];
                dn_s[k] += sign * (s.dn[a][0] * n[0] + s.dn[a][1] * n[1]);
                dv_s[k][0] += sign * s.dn[a][0];
                dv_s[k][1] += sign * s.dn[a][1];
                let h = hs[a];
                d2_s[k] += sign * (n[0] * (h[0][0] * n[0] + h[0][1] * n[1]) + n[1] * (h[1][0] * n[0] + h[1][1] * n[1]));
            }
        }
        // jumps of the unknown fields
        let mut jv = [T::zero(); 2];
        let mut jp = T::zero();
        let mut jdiv = T::zero();
        let mut j2v = [T::zero(); 2];
        let mut j2p = T::zero();
        for k in 0..6 {
            for i in 0..2 {
                jv[i] += x[3 * k + i] * dn_s[k];
                j2v[i] += x[3 * k + i] * d2_s[k];
                jdiv += x[3 * k + i] * dv_s[k][i];
            }
            jp += x[3 * k + 2] * dn_s[k];
            j2p += x[3 * k + 2] * d2_s[k];
        }
        let w = f.w[q];
        let (mut tu1, mut tu2, mut tp1, mut tp2, mut tdiv) = (cip.tau_u, T::zero(), cip.tau_p, T::zero(), cip.tau_div);
        if let Some(g) = gp {
            tu1 += g[0];
            tu2 = g[1];
            tp1 += g[2];
            tp2 = g[3];
            tdiv += g[4];
        }
        for k in 0..6 {
            for i in 0..2 {
                let val = tu1 * jv[i] * dn_s[k] + tu2 * j2v[i] * d2_s[k] + tdiv * jdiv * dv_s[k][i];
                r[3 * k + i] += val * w;
            }
            r[3 * k + 2] += (tp1 * jp * dn_s[k] + tp2 * j2p * d2_s[k]) * w;
        }
    }
}
