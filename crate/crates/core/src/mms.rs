//! Manufactured solution for the coupled problem: analytic fields, body
//! forces, interface jumps, the rotated-squares setup and the error norms.

use std::f64::consts::PI;

use crate::assembly::{FluidNode, Model, PoroDomain, PoroNode, ProblemData, State};
use crate::coupling_form::{slip_coefficient, Jumps};
use crate::cutgeom::{CutTopology, InterfacePolyline};
use crate::dual::{det, inv, matmul, matvec, transpose, Dual, Scalar, M2};
use crate::error::{Error, Result};
use crate::mesh::{build_structured_mesh, gauss_1d, map_quad};
use crate::params::{FluidParams, NitscheConfig, Permeability, PorosityMode, PoroParams, TimeParams};
use crate::poro_form::{kinematics, material_permeability, second_pk_stress};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsParams {
    pub a_f: f64,
    pub a_p: f64,
    pub a_ps: f64,
    pub b: f64,
    pub c: f64,
    pub fluid: FluidParams,
    pub poro: PoroParams,
    pub alpha_bj: f64,
    pub beta_bj: f64,
}

impl Default for MmsParams {
    fn default() -> Self {
        MmsParams {
            a_f: 0.1,
            a_p: 0.21,
            a_ps: -0.01,
            b: 1.0,
            c: 0.01,
            fluid: FluidParams { rho: 1.0, mu: 1.0 },
            poro: PoroParams {
                phi0: 0.5,
                permeability: Permeability::Constant(0.1),
                youngs: 1000.0,
                poisson: 0.3,
                bulk: 100.0,
                rho_s0: 1.0,
                porosity_mode: PorosityMode::Constant,
            },
            alpha_bj: 1.0,
            beta_bj: 1.0,
        }
    }
}

/// Analytic values at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fields {
    pub v_f: [f64; 2],
    pub p: f64,
    pub v_p: [f64; 2],
    pub u: [f64; 2],
    pub u_rate: [f64; 2],
}

#[derive(Clone, Copy, Debug)]
pub struct Mms {
    pub prm: MmsParams,
}

fn pattern<T: Scalar>(a: f64, x: [T; 2]) -> [T; 2] {
    let (ax, ay) = (x[0] * a, x[1] * a);
    [-(ax.cos() * ay.sin()), ax.sin() * ay.cos()]
}

fn pattern_grad<T: Scalar>(a: f64, x: [T; 2]) -> M2<T> {
    let (ax, ay) = (x[0] * a, x[1] * a);
    let (sx, cx, sy, cy) = (ax.sin(), ax.cos(), ay.sin(), ay.cos());
    [[sx * sy * a, -(cx * cy * a)], [cx * cy * a, -(sx * sy * a)]]
}

impl Mms {
    pub fn new(prm: MmsParams) -> Mms {
        Mms { prm }
    }

    fn a(&self) -> f64 {
        self.prm.b * PI
    }

    /// Decay rate λ with `g_u = exp(−λ t)`.
    pub fn lambda(&self) -> f64 {
        2.0 * self.prm.c * self.prm.c * PI * PI * self.prm.fluid.mu / self.prm.fluid.rho
    }

    pub fn g_u(&self, t: f64) -> f64 {
        (-self.lambda() * t).exp()
    }

    pub fn g_p(&self, t: f64) -> f64 {
        (-2.0 * self.lambda() * t).exp()
    }

    /// `∫₀ᵗ g_u`, the time factor of the displacement.
    fn g_int(&self, t: f64) -> f64 {
        let l = self.lambda();
        if l * t < 1e-8 {
            t * (1.0 - 0.5 * l * t)
        } else {
            (1.0 - self.g_u(t)) / l
        }
    }

    pub fn fluid_velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = pattern(self.a(), x);
        let g = self.prm.a_f * self.g_u(t);
        [s[0] * g, s[1] * g]
    }

    pub fn fluid_velocity_grad(&self, x: [f64; 2], t: f64) -> M2<f64> {
        let g = self.prm.a_f * self.g_u(t);
        pattern_grad(self.a(), x).map(|r| r.map(|v| v * g))
    }

    pub fn poro_velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = pattern(self.a(), x);
        let g = self.prm.a_p * self.g_u(t);
        [s[0] * g, s[1] * g]
    }

    pub fn poro_velocity_grad(&self, x: [f64; 2], t: f64) -> M2<f64> {
        let g = self.prm.a_p * self.g_u(t);
        pattern_grad(self.a(), x).map(|r| r.map(|v| v * g))
    }

    /// Pressure, shared by both domains.
    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        let a = self.a();
        -0.25 * ((2.0 * a * x[0]).cos() + (2.0 * a * x[1]).cos()) * self.prm.fluid.rho * self.g_p(t)
    }

    pub fn pressure_grad(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let a = self.a();
        let f = 0.5 * a * self.prm.fluid.rho * self.g_p(t);
        [f * (2.0 * a * x[0]).sin(), f * (2.0 * a * x[1]).sin()]
    }

    pub fn displacement(&self, xr: [f64; 2], t: f64) -> [f64; 2] {
        let s = pattern(self.a(), xr);
        let g = self.prm.a_ps * self.g_int(t);
        [s[0] * g, s[1] * g]
    }

    fn displacement_grad_generic<T: Scalar>(&self, xr: [T; 2], t: f64) -> M2<T> {
        let g = self.prm.a_ps * self.g_int(t);
        pattern_grad(self.a(), xr).map(|r| r.map(|v| v * g))
    }

    pub fn displacement_grad(&self, xr: [f64; 2], t: f64) -> M2<f64> {
        self.displacement_grad_generic(xr, t)
    }

    pub fn displacement_rate(&self, xr: [f64; 2], t: f64) -> [f64; 2] {
        let s = pattern(self.a(), xr);
        let g = self.prm.a_ps * self.g_u(t);
        [s[0] * g, s[1] * g]
    }

    pub fn displacement_acc(&self, xr: [f64; 2], t: f64) -> [f64; 2] {
        let r = self.displacement_rate(xr, t);
        let l = self.lambda();
        [-l * r[0], -l * r[1]]
    }

    /// Current position of the material point `xr`.
    pub fn current(&self, xr: [f64; 2], t: f64) -> [f64; 2] {
        let u = self.displacement(xr, t);
        [xr[0] + u[0], xr[1] + u[1]]
    }

    pub fn fields(&self, x: [f64; 2], xr: [f64; 2], t: f64) -> Fields {
        Fields {
            v_f: self.fluid_velocity(x, t),
            p: self.pressure(x, t),
            v_p: self.poro_velocity(x, t),
            u: self.displacement(xr, t),
            u_rate: self.displacement_rate(xr, t),
        }
    }

    pub fn fluid_stress(&self, x: [f64; 2], t: f64) -> M2<f64> {
        let g = self.fluid_velocity_grad(x, t);
        let p = self.pressure(x, t);
        let mu = self.prm.fluid.mu;
        let mut s = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] = mu * (g[i][j] + g[j][i]) - if i == j { p } else { 0.0 };
            }
        }
        s
    }

    fn deformation(&self, xr: [f64; 2], t: f64) -> M2<f64> {
        let g = self.displacement_grad(xr, t);
        [[1.0 + g[0][0], g[0][1]], [g[1][0], 1.0 + g[1][1]]]
    }

    /// Spatial permeability `J⁻¹ F K Fᵀ` of the analytic deformation.
    fn spatial_permeability(&self, f: M2<f64>) -> Result<M2<f64>> {
        let j = det(f);
        let k = material_permeability(self.prm.poro.phi0, j, &self.prm.poro)?;
        let ff = matmul(f, transpose(f));
        Ok(ff.map(|r| r.map(|v| v * k / j)))
    }

    /// Skeleton Cauchy stress plus the pore pressure, `J⁻¹ F S Fᵀ − p I`.
    pub fn poro_stress(&self, xr: [f64; 2], t: f64) -> Result<M2<f64>> {
        let f = self.deformation(xr, t);
        let kin = kinematics(self.displacement_grad(xr, t), 0)?;
        let s = second_pk_stress(&kin, 0.0, &self.prm.poro);
        let sig = matmul(matmul(f, s), transpose(f));
        let p = self.pressure(self.current(xr, t), t);
        Ok([[sig[0][0] / kin.j - p, sig[0][1] / kin.j], [sig[1][0] / kin.j, sig[1][1] / kin.j - p]])
    }

    /// `Div₀(F S)` of the skeleton stress, by forward differentiation in `X`.
    fn first_pk_divergence(&self, xr: [f64; 2], t: f64) -> Result<[f64; 2]> {
        let xd = Dual::<2>::seed(&xr);
        let g = self.displacement_grad_generic([xd[0], xd[1]], t);
        let kin = kinematics(g, 0)?;
        let s = second_pk_stress(&kin, Dual::constant(0.0), &self.prm.poro);
        let p = matmul(kin.f, s);
        Ok([p[0][0].d[0] + p[0][1].d[1], p[1][0].d[0] + p[1][1].d[1]])
    }

    fn body_fluid(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let (rho, mu) = (self.prm.fluid.rho, self.prm.fluid.mu);
        let v = self.fluid_velocity(x, t);
        let g = self.fluid_velocity_grad(x, t);
        let gp = self.pressure_grad(x, t);
        let a = self.a();
        let l = self.lambda();
        // ∂t v = −λ v, Δv = −2a² v
        let mut out = [0.0; 2];
        for i in 0..2 {
            let conv = g[i][0] * v[0] + g[i][1] * v[1];
            out[i] = -rho * l * v[i] + rho * conv + gp[i] + 2.0 * mu * a * a * v[i];
        }
        out
    }

    fn body_poro(&self, xr: [f64; 2], t: f64) -> Result<([f64; 2], [f64; 2])> {
        let (rho, mu) = (self.prm.fluid.rho, self.prm.fluid.mu);
        let phi = self.prm.poro.phi0;
        let x = self.current(xr, t);
        let f = self.deformation(xr, t);
        let j = det(f);
        let kinv = inv(self.spatial_permeability(f)?);
        let v = self.poro_velocity(x, t);
        let ud = self.displacement_rate(xr, t);
        let w = [v[0] - ud[0], v[1] - ud[1]];
        let kw = matvec(kinv, w);
        let gp = self.pressure_grad(x, t);
        // the convective part of the material derivative cancels the −ρ (∇v) u̇ term
        let l = self.lambda();
        let bf = [0, 1].map(|i| -rho * l * v[i] + gp[i] + mu * phi * kw[i]);
        let acc = self.displacement_acc(xr, t);
        let div = self.first_pk_divergence(xr, t)?;
        let rho0 = (1.0 - phi) * self.prm.poro.rho_s0;
        let bs = [0, 1].map(|i| rho0 * acc[i] - div[i] + (1.0 - phi) * j * gp[i] - mu * j * phi * phi * kw[i]);
        Ok((bf, bs))
    }

    fn slip(&self, xr: [f64; 2], t: f64) -> Result<f64> {
        let k = self.spatial_permeability(self.deformation(xr, t))?;
        slip_coefficient(k, self.prm.fluid.mu, self.prm.alpha_bj)
    }

    /// Jumps at the material point `xr` for the discrete normal `n` (fluid outward).
    pub fn interface_jumps(&self, xr: [f64; 2], t: f64, n: [f64; 2]) -> Result<Jumps> {
        let x = self.current(xr, t);
        let sf = self.fluid_stress(x, t);
        let sp = self.poro_stress(xr, t)?;
        let sfn = matvec(sf, n);
        let spn = matvec(sp, n);
        let p = self.pressure(x, t);
        let vf = self.fluid_velocity(x, t);
        let vp = self.poro_velocity(x, t);
        let ud = self.displacement_rate(xr, t);
        let phi = self.prm.poro.phi0;
        let kappa = self.slip(xr, t)?;
        let beta = self.prm.beta_bj;
        Ok(Jumps {
            g_sigma: [sfn[0] - spn[0], sfn[1] - spn[1]],
            g_sigma_n: n[0] * sfn[0] + n[1] * sfn[1] + p,
            g_n: [0, 1].map(|i| vf[i] - ud[i] - phi * (vp[i] - ud[i])),
            g_t: [0, 1].map(|i| vf[i] - ud[i] - beta * phi * (vp[i] - ud[i]) + kappa * sfn[i]),
        })
    }
}

impl ProblemData for Mms {
    fn fluid_body(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.body_fluid(x, t)
    }

    fn poro_fluid_body(&self, xr: [f64; 2], t: f64) -> [f64; 2] {
        self.body_poro(xr, t).map(|b| b.0).unwrap_or([f64::NAN; 2])
    }

    fn poro_solid_body(&self, xr: [f64; 2], t: f64) -> [f64; 2] {
        self.body_poro(xr, t).map(|b| b.1).unwrap_or([f64::NAN; 2])
    }

    fn jumps(&self, _x: [f64; 2], xr: [f64; 2], t: f64, n: [f64; 2]) -> Jumps {
        self.interface_jumps(xr, t, n).unwrap_or(Jumps {
            g_sigma: [f64::NAN; 2],
            g_sigma_n: f64::NAN,
            g_n: [f64::NAN; 2],
            g_t: [f64::NAN; 2],
        })
    }

    fn neumann_traction(&self, x: [f64; 2], t: f64, n: [f64; 2], _line: usize) -> [f64; 2] {
        matvec(self.fluid_stress(x, t), n)
    }

    fn fluid_velocity_bc(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.fluid_velocity(x, t)
    }

    fn poro_bc(&self, xr: [f64; 2], t: f64, comp: usize) -> f64 {
        let x = self.current(xr, t);
        match comp {
            0 | 1 => self.poro_velocity(x, t)[comp],
            2 | 3 => self.displacement(xr, t)[comp - 2],
            _ => self.pressure(x, t),
        }
    }

    fn initial_fluid(&self, x: [f64; 2]) -> FluidNode {
        let v = self.fluid_velocity(x, 0.0);
        let l = self.lambda();
        FluidNode { v, p: self.pressure(x, 0.0), a: [-l * v[0], -l * v[1]] }
    }

    fn initial_poro(&self, xr: [f64; 2]) -> PoroNode {
        let v = self.poro_velocity(xr, 0.0);
        let g = self.poro_velocity_grad(xr, 0.0);
        let ud = self.displacement_rate(xr, 0.0);
        let l = self.lambda();
        // rate at fixed material point: ∂t v + (∇v) u̇
        let v_rate = [0, 1].map(|i| -l * v[i] + g[i][0] * ud[0] + g[i][1] * ud[1]);
        PoroNode {
            v,
            v_rate,
            u: self.displacement(xr, 0.0),
            u_rate: ud,
            u_acc: self.displacement_acc(xr, 0.0),
            p: self.pressure(xr, 0.0),
        }
    }
}

/// Setup of the rotated-squares example.
#[derive(Clone, Debug)]
pub struct RotatedSquares {
    pub h: f64,
    pub with_poro: bool,
}

/// Offset of the cut Neumann line; the strip with local `x < CUT_OFFSET` is removed.
pub const CUT_OFFSET: f64 = -0.45;

fn elements_for(length: f64, h: f64) -> Result<usize> {
    let n = length / h;
    let r = n.round();
    if !(h > 0.0) || r < 1.0 || (n - r).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidArgument(format!("mesh size {h} does not divide length {length}")));
    }
    Ok(r as usize)
}

/// Builds the model: fluid square of side 1 rotated 45°, poro square of side
/// 0.5 rotated 30°, both centred at the origin, and a cut Neumann line at
/// `CUT_OFFSET` along the fluid square's local x axis.
pub fn build_rotated_squares(h: f64, prm: &MmsParams, nitsche: NitscheConfig, time: TimeParams, with_poro: bool) -> Result<Model> {
    let nf = elements_for(1.0, h)?;
    let np = elements_for(0.5, h)?;
    let beta = PI / 4.0;
    let alpha = PI / 6.0;
    let fluid_mesh = build_structured_mesh([-0.5, -0.5], [1.0, 1.0], nf, nf, beta)?;
    let poro = if with_poro {
        let pm = build_structured_mesh([-0.25, -0.25], [0.5, 0.5], np, np, alpha)?;
        Some(PoroDomain::new(pm, prm.poro, Vec::new(), Vec::new())?)
    } else {
        None
    };
    let mut model = Model::new(fluid_mesh, poro, prm.fluid, time);
    let e1 = [beta.cos(), beta.sin()];
    model.neumann_lines = vec![InterfacePolyline::cut_line([CUT_OFFSET * e1[0], CUT_OFFSET * e1[1]], e1, 1.0)];
    let mut fixed = vec![false; model.fluid_mesh.nodes.len()];
    for tag in ["top", "bottom", "right"] {
        for n in model.fluid_mesh.tagged_nodes(tag) {
            fixed[n] = true;
        }
    }
    model.fluid_dirichlet = (0..fixed.len()).filter(|&n| fixed[n]).map(|n| (n, [true, true])).collect();
    model.nitsche = NitscheConfig { alpha_bj: prm.alpha_bj, beta_bj: prm.beta_bj, ..nitsche };
    Ok(model)
}

pub const NORM_NAMES: [&str; 13] = [
    "fluid_velocity",
    "fluid_pressure",
    "fluid_velocity_gradient",
    "poro_velocity",
    "poro_pressure",
    "displacement",
    "displacement_gradient",
    "interface_fluid_pressure",
    "interface_fluid_normal_gradient",
    "interface_poro_pressure",
    "interface_displacement_normal_gradient",
    "interface_normal_kinematic",
    "interface_tangential_kinematic",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub values: [f64; 13],
}

impl ErrorReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        NORM_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

fn sq2(a: [f64; 2]) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

fn sqm(a: M2<f64>) -> f64 {
    sq2(a[0]) + sq2(a[1])
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn subm(a: M2<f64>, b: M2<f64>) -> M2<f64> {
    [sub2(a[0], b[0]), sub2(a[1], b[1])]
}

/// Discrete poro quantities at a reference point of element `e`.
struct PoroEval {
    x: [f64; 2],
    x_ref: [f64; 2],
    v: [f64; 2],
    u: [f64; 2],
    u_rate: [f64; 2],
    p: f64,
    grad0_u: M2<f64>,
    f: M2<f64>,
    det0: f64,
}

fn poro_eval(model: &Model, s: &State, e: usize, xi: [f64; 2]) -> PoroEval {
    let pd = model.poro.as_ref().expect("poro domain");
    let el = pd.mesh.elements[e];
    let rc = pd.mesh.coords(e);
    let sm = map_quad(&rc, xi);
    let mut out = PoroEval {
        x: [0.0; 2],
        x_ref: sm.x,
        v: [0.0; 2],
        u: [0.0; 2],
        u_rate: [0.0; 2],
        p: 0.0,
        grad0_u: [[0.0; 2]; 2],
        f: [[0.0; 2]; 2],
        det0: sm.det,
    };
    for (a, &n) in el.iter().enumerate() {
        let pn = &s.poro[n];
        for i in 0..2 {
            out.v[i] += sm.n[a] * pn.v[i];
            out.u[i] += sm.n[a] * pn.u[i];
            out.u_rate[i] += sm.n[a] * pn.u_rate[i];
            for j in 0..2 {
                out.grad0_u[i][j] += pn.u[i] * sm.dn[a][j];
            }
        }
        out.p += sm.n[a] * pn.p;
    }
    out.x = [out.x_ref[0] + out.u[0], out.x_ref[1] + out.u[1]];
    out.f = [[1.0 + out.grad0_u[0][0], out.grad0_u[0][1]], [out.grad0_u[1][0], 1.0 + out.grad0_u[1][1]]];
    out
}

/// All error norms of the discrete state `s` against the analytic solution at `s.t`.
pub fn error_norms(model: &Model, mms: &Mms, s: &State, topo: &CutTopology, h: f64) -> Result<ErrorReport> {
    let t = s.t;
    let fm = &model.fluid_mesh;
    let mut acc = [0.0; 13];
    for (e, quad) in topo.physical_quadrature.iter().enumerate() {
        if quad.is_empty() {
            continue;
        }
        let el = fm.elements[e];
        let c = fm.coords(e);
        for q in quad {
            let sm = map_quad(&c, q.xi);
            let (mut v, mut p, mut g) = ([0.0; 2], 0.0, [[0.0; 2]; 2]);
            for (a, &n) in el.iter().enumerate() {
                let fnode = &s.fluid[n];
                for i in 0..2 {
                    v[i] += sm.n[a] * fnode.v[i];
                    for j in 0..2 {
                        g[i][j] += fnode.v[i] * sm.dn[a][j];
                    }
                }
                p += sm.n[a] * fnode.p;
            }
            acc[0] += q.w * sq2(sub2(v, mms.fluid_velocity(q.x, t)));
            acc[1] += q.w * (p - mms.pressure(q.x, t)).powi(2);
            acc[2] += q.w * sqm(subm(g, mms.fluid_velocity_grad(q.x, t)));
        }
    }
    if let Some(pd) = &model.poro {
        let g3 = gauss_1d(3);
        for e in 0..pd.mesh.elements.len() {
            for &(gx, wx) in &g3 {
                for &(gy, wy) in &g3 {
                    let pe = poro_eval(model, s, e, [gx, gy]);
                    let w0 = wx * wy * pe.det0;
                    let w = w0 * det(pe.f);
                    acc[3] += w * sq2(sub2(pe.v, mms.poro_velocity(pe.x, t)));
                    acc[4] += w * (pe.p - mms.pressure(pe.x, t)).powi(2);
                    acc[5] += w0 * sq2(sub2(pe.u, mms.displacement(pe.x_ref, t)));
                    acc[6] += w0 * sqm(subm(pe.grad0_u, mms.displacement_grad(pe.x_ref, t)));
                }
            }
        }
        let phi = mms.prm.poro.phi0;
        let beta = model.nitsche.beta_bj;
        for q in &topo.interface_quadrature {
            let n = q.normal;
            let el = fm.elements[q.element];
            let sm = map_quad(&fm.coords(q.element), q.fluid_xi);
            let (mut vf, mut pf, mut g) = ([0.0; 2], 0.0, [[0.0; 2]; 2]);
            for (a, &m) in el.iter().enumerate() {
                let fnode = &s.fluid[m];
                for i in 0..2 {
                    vf[i] += sm.n[a] * fnode.v[i];
                    for j in 0..2 {
                        g[i][j] += fnode.v[i] * sm.dn[a][j];
                    }
                }
                pf += sm.n[a] * fnode.p;
            }
            let pe = poro_eval(model, s, q.poro_element, q.poro_xi);
            let xa = mms.current(pe.x_ref, t);
            acc[7] += q.w * (pf - mms.pressure(q.x, t)).powi(2);
            let dg = subm(g, mms.fluid_velocity_grad(q.x, t));
            acc[8] += q.w * sq2(matvec(dg, n));
            acc[9] += q.w * (pe.p - mms.pressure(xa, t)).powi(2);
            // spatial displacement gradients ∇u = ∇₀u F⁻¹
            let gu = matmul(pe.grad0_u, inv(pe.f));
            let fa = mms.deformation(pe.x_ref, t);
            let gua = matmul(mms.displacement_grad(pe.x_ref, t), inv(fa));
            acc[10] += q.w * sq2(matvec(subm(gu, gua), n));
            let ua = mms.displacement_rate(pe.x_ref, t);
            let vfa = mms.fluid_velocity(q.x, t);
            let vpa = mms.poro_velocity(xa, t);
            let kin = |vf: [f64; 2], ud: [f64; 2], vp: [f64; 2], b: f64| [0, 1].map(|i| vf[i] - ud[i] - b * phi * (vp[i] - ud[i]));
            let dn = sub2(kin(vf, pe.u_rate, pe.v, 1.0), kin(vfa, ua, vpa, 1.0));
            let dt = sub2(kin(vf, pe.u_rate, pe.v, beta), kin(vfa, ua, vpa, beta));
            let nn = dn[0] * n[0] + dn[1] * n[1];
            let tn = dt[0] * n[0] + dt[1] * n[1];
            acc[11] += q.w * nn * nn;
            acc[12] += q.w * sq2([dt[0] - tn * n[0], dt[1] - tn * n[1]]);
        }
    }
    Ok(ErrorReport { h, values: acc.map(f64::sqrt) })
}

/// Nodal interpolant of the analytic solution at time `t`, on all nodes.
pub fn interpolant(model: &Model, mms: &Mms, t: f64) -> Result<State> {
    let mut s = State::initial(model, mms, t)?;
    for (n, &x) in model.fluid_mesh.nodes.iter().enumerate() {
        s.fluid[n].v = mms.fluid_velocity(x, t);
        s.fluid[n].p = mms.pressure(x, t);
    }
    if let Some(pd) = &model.poro {
        for (n, &xr) in pd.mesh.nodes.iter().enumerate() {
            let x = mms.current(xr, t);
            let node = &mut s.poro[n];
            node.v = mms.poro_velocity(x, t);
            node.u = mms.displacement(xr, t);
            node.u_rate = mms.displacement_rate(xr, t);
            node.p = mms.pressure(x, t);
        }
    }
    Ok(s)
}
