//! Problem description, degree-of-freedom numbering, nodal state and the
//! global residual/Jacobian assembly.

use faer::sparse::Triplet;
use rayon::prelude::*;

use crate::coupling_form::{interface_residual, InterfacePointData, Jumps, Terms, PORO};
use crate::cutgeom::{CutTopology, InterfacePolyline};
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::fluid_form::{
    face_geometry, fluid_element_residual, fluid_face_residual, fluid_neumann_residual, FaceGeometry,
    FluidElementData,
};
use crate::mesh::{shape_values, ElementLocator, Mesh};
use crate::params::{FluidParams, NitscheConfig, PoroParams, StabConstants, TimeParams};
use crate::poro_form::{poro_element_residual, poro_face_residual, PoroElementData, PoroNodalHistory};

/// Prescribed data of a problem. Defaults are homogeneous.
pub trait ProblemData: Sync {
    /// ρ b̂ in the fluid domain.
    fn fluid_body(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// ρ b̂^{PF}, as a function of the reference position.
    fn poro_fluid_body(&self, _x_ref: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// ρ̃₀ b̂^{S}, as a function of the reference position.
    fn poro_solid_body(&self, _x_ref: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn jumps(&self, _x: [f64; 2], _x_ref: [f64; 2], _t: f64, _n: [f64; 2]) -> Jumps {
        Jumps::default()
    }
    /// Traction on the cut Neumann line `line`, outward normal `n`.
    fn neumann_traction(&self, _x: [f64; 2], _t: f64, _n: [f64; 2], _line: usize) -> [f64; 2] {
        [0.0; 2]
    }
    fn fluid_velocity_bc(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Prescribed value of poro component `comp` (0,1 velocity, 2,3 displacement, 4 pressure).
    fn poro_bc(&self, _x_ref: [f64; 2], _t: f64, _comp: usize) -> f64 {
        0.0
    }
    fn initial_fluid(&self, _x: [f64; 2]) -> FluidNode {
        FluidNode::default()
    }
    fn initial_poro(&self, _x_ref: [f64; 2]) -> PoroNode {
        PoroNode::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub rtol: f64,
    pub atol: f64,
    pub jacobian: JacobianMode,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { max_iterations: 25, rtol: 1e-8, atol: 1e-10, jacobian: JacobianMode::Analytic }
    }
}

/// Poroelastic body, discretized on its own (reference) mesh.
#[derive(Clone, Debug)]
pub struct PoroDomain {
    pub mesh: Mesh,
    pub params: PoroParams,
    /// Boundary tags that are not part of the fluid interface.
    pub closure_tags: Vec<String>,
    /// Constrained `(node, component)` pairs.
    pub dirichlet: Vec<(usize, usize)>,
    pub faces: Vec<FaceGeometry>,
    /// Boundary edges of each element carrying the mass flux term.
    pub flux_edges: Vec<Vec<usize>>,
}

impl PoroDomain {
    pub fn new(mesh: Mesh, params: PoroParams, closure_tags: Vec<String>, dirichlet: Vec<(usize, usize)>) -> Result<Self> {
        params.validate()?;
        let fs = mesh.all_faces();
        let faces = fs
            .faces
            .iter()
            .zip(&fs.h)
            .map(|(&f, &h)| {
                let face = &mesh.interior_faces[f];
                let [a, b] = face.elements;
                face_geometry([mesh.elements[a], mesh.elements[b]], [mesh.coords(a), mesh.coords(b)], face.local_edges, h)
            })
            .collect();
        let mut flux_edges = vec![Vec::new(); mesh.elements.len()];
        for be in &mesh.boundary_edges {
            flux_edges[be.element].push(be.local_edge);
        }
        Ok(PoroDomain { mesh, params, closure_tags, dirichlet, faces, flux_edges })
    }

    pub fn closure_refs(&self) -> Vec<&str> {
        self.closure_tags.iter().map(|s| s.as_str()).collect()
    }
}

/// Everything that defines a run apart from the prescribed data.
#[derive(Clone, Debug)]
pub struct Model {
    pub fluid_mesh: Mesh,
    pub locator: ElementLocator,
    pub node_elements: Vec<Vec<usize>>,
    pub poro: Option<PoroDomain>,
    pub fluid: FluidParams,
    pub stab: StabConstants,
    pub nitsche: NitscheConfig,
    pub time: TimeParams,
    pub newton: NewtonConfig,
    /// Cut Neumann lines of the fluid domain.
    pub neumann_lines: Vec<InterfacePolyline>,
    /// Constrained fluid velocity components per background node.
    pub fluid_dirichlet: Vec<(usize, [bool; 2])>,
}

impl Model {
    pub fn new(fluid_mesh: Mesh, poro: Option<PoroDomain>, fluid: FluidParams, time: TimeParams) -> Model {
        let locator = ElementLocator::new(&fluid_mesh);
        let node_elements = fluid_mesh.node_elements();
        Model {
            fluid_mesh,
            locator,
            node_elements,
            poro,
            fluid,
            stab: StabConstants::default(),
            nitsche: NitscheConfig::default(),
            time,
            newton: NewtonConfig::default(),
            neumann_lines: Vec::new(),
            fluid_dirichlet: Vec::new(),
        }
    }

    /// Builds the interface from the displacement `u` and cuts the background mesh.
    pub fn cut(&self, u: &[[f64; 2]]) -> Result<CutTopology> {
        let mut lines = Vec::new();
        if let Some(pd) = &self.poro {
            lines.push(crate::cutgeom::extract_interface(&pd.mesh, u, &pd.closure_refs())?);
        }
        lines.extend(self.neumann_lines.iter().cloned());
        crate::cutgeom::classify_and_cut(&self.fluid_mesh, &self.locator, &lines, self.poro.as_ref().map(|p| &p.mesh))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluidNode {
    pub v: [f64; 2],
    pub p: f64,
    /// Velocity rate at the time level of `v`.
    pub a: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PoroNode {
    pub v: [f64; 2],
    pub v_rate: [f64; 2],
    pub u: [f64; 2],
    pub u_rate: [f64; 2],
    pub u_acc: [f64; 2],
    pub p: f64,
}

/// Discrete solution at one time level.
#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    /// Values on all background nodes; only `fluid_valid` ones belong to the field.
    pub fluid: Vec<FluidNode>,
    pub fluid_valid: Vec<bool>,
    pub poro: Vec<PoroNode>,
    /// Porosity and its rate at the 2×2 Gauss points of each poro element.
    pub phi: Vec<[f64; 4]>,
    pub phi_rate: Vec<[f64; 4]>,
}

impl State {
    pub fn initial(model: &Model, data: &dyn ProblemData, t: f64) -> Result<State> {
        let fluid: Vec<FluidNode> = model.fluid_mesh.nodes.iter().map(|&x| data.initial_fluid(x)).collect();
        let n = fluid.len();
        let (poro, phi) = match &model.poro {
            Some(pd) => {
                let poro: Vec<PoroNode> = pd.mesh.nodes.iter().map(|&x| data.initial_poro(x)).collect();
                let mut phi = Vec::with_capacity(pd.mesh.elements.len());
                for (e, el) in pd.mesh.elements.iter().enumerate() {
                    let u = el.map(|a| poro[a].u);
                    let p = el.map(|a| poro[a].p);
                    phi.push(
                        crate::poro_form::gauss_porosity(&pd.mesh.coords(e), &u, &p, &pd.params).map_err(|err| relabel(err, e))?,
                    );
                }
                (poro, phi)
            }
            None => (Vec::new(), Vec::new()),
        };
        let phi_rate = vec![[0.0; 4]; phi.len()];
        Ok(State { t, fluid, fluid_valid: vec![true; n], poro, phi, phi_rate })
    }

    pub fn displacements(&self) -> Vec<[f64; 2]> {
        self.poro.iter().map(|p| p.u).collect()
    }

    pub fn poro_history(&self, el: &[usize; 4]) -> PoroNodalHistory {
        let g = |f: &dyn Fn(&PoroNode) -> [f64; 2]| el.map(|a| f(&self.poro[a]));
        PoroNodalHistory {
            v: g(&|n| n.v),
            v_rate: g(&|n| n.v_rate),
            u: g(&|n| n.u),
            u_rate: g(&|n| n.u_rate),
            u_acc: g(&|n| n.u_acc),
            p: el.map(|a| self.poro[a].p),
        }
    }
}

pub(crate) fn relabel(err: Error, element: usize) -> Error {
    match err {
        Error::ElementInversion { .. } => Error::ElementInversion { element },
        e => e,
    }
}

/// Global numbering: fluid velocities, fluid pressures, poro velocities,
/// displacements, poro pressures.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// Index of each background node among the active ones.
    pub fluid_index: Vec<Option<usize>>,
    pub n_fluid: usize,
    pub n_poro: usize,
}

impl DofMap {
    pub fn new(topo: &CutTopology, n_poro: usize) -> DofMap {
        let mut k = 0;
        let fluid_index = topo
            .active_nodes
            .iter()
            .map(|&a| {
                if a {
                    k += 1;
                    Some(k - 1)
                } else {
                    None
                }
            })
            .collect();
        DofMap { fluid_index, n_fluid: k, n_poro }
    }

    pub fn len(&self) -> usize {
        3 * self.n_fluid + 5 * self.n_poro
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fluid_velocity(&self, node: usize, i: usize) -> Option<usize> {
        self.fluid_index[node].map(|k| 2 * k + i)
    }

    pub fn fluid_pressure(&self, node: usize) -> Option<usize> {
        self.fluid_index[node].map(|k| 2 * self.n_fluid + k)
    }

    /// Poro component `comp` in the local order (v_x, v_y, u_x, u_y, p).
    pub fn poro(&self, node: usize, comp: usize) -> usize {
        let base = 3 * self.n_fluid;
        match comp {
            0 | 1 => base + 2 * node + comp,
            2 | 3 => base + 2 * self.n_poro + 2 * node + comp - 2,
            _ => base + 4 * self.n_poro + node,
        }
    }

    fn fluid_local(&self, nodes: &[usize], out: &mut Vec<usize>) {
        for &n in nodes {
            let k = self.fluid_index[n].expect("inactive node in active element");
            out.extend([2 * k, 2 * k + 1, 2 * self.n_fluid + k]);
        }
    }

    fn poro_local(&self, nodes: &[usize], out: &mut Vec<usize>) {
        for &n in nodes {
            out.extend((0..5).map(|c| self.poro(n, c)));
        }
    }

    pub fn pack(&self, s: &State) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for (n, k) in self.fluid_index.iter().enumerate() {
            if let Some(k) = *k {
                x[2 * k] = s.fluid[n].v[0];
                x[2 * k + 1] = s.fluid[n].v[1];
                x[2 * self.n_fluid + k] = s.fluid[n].p;
            }
        }
        for (n, pn) in s.poro.iter().enumerate() {
            let vals = [pn.v[0], pn.v[1], pn.u[0], pn.u[1], pn.p];
            for (c, v) in vals.into_iter().enumerate() {
                x[self.poro(n, c)] = v;
            }
        }
        x
    }

    /// Writes `x` into `s`; active fluid nodes become valid, all others invalid.
    pub fn unpack(&self, x: &[f64], s: &mut State) {
        for (n, k) in self.fluid_index.iter().enumerate() {
            s.fluid_valid[n] = k.is_some();
            if let Some(k) = *k {
                s.fluid[n].v = [x[2 * k], x[2 * k + 1]];
                s.fluid[n].p = x[2 * self.n_fluid + k];
            }
        }
        for n in 0..s.poro.len() {
            s.poro[n].v = [x[self.poro(n, 0)], x[self.poro(n, 1)]];
            s.poro[n].u = [x[self.poro(n, 2)], x[self.poro(n, 3)]];
            s.poro[n].p = x[self.poro(n, 4)];
        }
    }
}

/// Element-local residual and, unless `mode` is `None`, the dense local
/// Jacobian (row-major). `fd` and `ff` must be the same kernel.
pub fn eval_local<const N: usize>(
    x: &[f64],
    mode: Option<JacobianMode>,
    fd: impl Fn(&[Dual<N>], &mut [Dual<N>]) -> Result<()>,
    ff: impl Fn(&[f64], &mut [f64]) -> Result<()>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(x.len(), N);
    match mode {
        None => {
            let mut r = vec![0.0; N];
            ff(x, &mut r)?;
            Ok((r, Vec::new()))
        }
        Some(JacobianMode::Analytic) => {
            let xd = Dual::<N>::seed(x);
            let mut rd = [Dual::<N>::constant(0.0); N];
            fd(&xd, &mut rd)?;
            let mut k = vec![0.0; N * N];
            for i in 0..N {
                k[i * N..(i + 1) * N].copy_from_slice(&rd[i].d);
            }
            Ok((rd.iter().map(|v| v.v).collect(), k))
        }
        Some(JacobianMode::FiniteDifference) => {
            let mut r = vec![0.0; N];
            ff(x, &mut r)?;
            let mut k = vec![0.0; N * N];
            let mut xp = x.to_vec();
            let mut rp = vec![0.0; N];
            let mut rm = vec![0.0; N];
            for c in 0..N {
                let h = 1e-7 * x[c].abs().max(1.0);
                xp[c] = x[c] + h;
                rp.iter_mut().for_each(|v| *v = 0.0);
                ff(&xp, &mut rp)?;
                xp[c] = x[c] - h;
                rm.iter_mut().for_each(|v| *v = 0.0);
                ff(&xp, &mut rm)?;
                xp[c] = x[c];
                for i in 0..N {
                    k[i * N + c] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            Ok((r, k))
        }
    }
}

macro_rules! local {
    ($n:literal, $x:expr, $mode:expr, |$xs:ident, $rs:ident| $body:expr) => {
        eval_local::<$n>(
            $x,
            $mode,
            |$xs: &[Dual<$n>], $rs: &mut [Dual<$n>]| $body,
            |$xs: &[f64], $rs: &mut [f64]| $body,
        )
    };
}

/// Quantities frozen during one Newton iteration.
pub struct StepContext<'a> {
    pub topo: &'a CutTopology,
    pub dofs: &'a DofMap,
    /// Old time level, extended to all currently active nodes.
    pub history: &'a State,
    pub t: f64,
    pub fluid_body: &'a [[f64; 2]],
    pub poro_fluid_body: &'a [[f64; 2]],
    pub poro_solid_body: &'a [[f64; 2]],
}

/// Nodal body forces at time `t`: fluid, poro fluid, poro solid.
pub fn nodal_bodies(model: &Model, data: &dyn ProblemData, t: f64) -> [Vec<[f64; 2]>; 3] {
    let f = model.fluid_mesh.nodes.par_iter().map(|&x| data.fluid_body(x, t)).collect();
    let (pf, ps) = match &model.poro {
        Some(pd) => (
            pd.mesh.nodes.par_iter().map(|&x| data.poro_fluid_body(x, t)).collect(),
            pd.mesh.nodes.par_iter().map(|&x| data.poro_solid_body(x, t)).collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    [f, pf, ps]
}

struct Local {
    dofs: Vec<usize>,
    r: Vec<f64>,
    k: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Task {
    FluidElement(usize),
    Neumann(usize),
    FluidFace(usize, bool),
    PoroElement(usize),
    PoroFace(usize),
    Interface(usize),
}

pub struct Assembled {
    pub residual: Vec<f64>,
    pub triplets: Vec<Triplet<usize, usize, f64>>,
}

impl Assembled {
    pub fn residual_norm(&self) -> f64 {
        self.residual.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Assembles the residual at the iterate `s` and, unless `mode` is `None`,
/// its Jacobian, with Dirichlet rows replaced by `x_i - g_i`.
pub fn assemble(
    model: &Model,
    data: &dyn ProblemData,
    ctx: &StepContext,
    s: &State,
    mode: Option<JacobianMode>,
) -> Result<Assembled> {
    let topo = ctx.topo;
    let dofs = ctx.dofs;
    let fm = &model.fluid_mesh;
    let mut tasks = Vec::new();
    for e in 0..fm.elements.len() {
        if topo.is_active_element(e) && !topo.physical_quadrature[e].is_empty() {
            tasks.push(Task::FluidElement(e));
        }
    }
    tasks.extend((0..topo.neumann_quadrature.len()).map(Task::Neumann));
    let mut ghost = vec![false; fm.interior_faces.len()];
    for &f in &topo.ghost_faces.faces {
        ghost[f] = true;
    }
    tasks.extend((0..topo.cip_faces.faces.len()).map(|i| Task::FluidFace(i, ghost[topo.cip_faces.faces[i]])));
    if let Some(pd) = &model.poro {
        tasks.extend((0..pd.mesh.elements.len()).map(Task::PoroElement));
        tasks.extend((0..pd.faces.len()).map(Task::PoroFace));
        tasks.extend((0..topo.interface_quadrature.len()).map(Task::Interface));
    }

    let x = dofs.pack(s);
    let ts = &model.time;
    let fl = &model.fluid;
    let st = &model.stab;
    let locals: Vec<Local> = tasks
        .par_iter()
        .map(|&task| -> Result<Local> {
            let mut ld = Vec::with_capacity(32);
            match task {
                Task::FluidElement(e) => {
                    let el = fm.elements[e];
                    dofs.fluid_local(&el, &mut ld);
                    let h = ctx.history;
                    let d = FluidElementData {
                        coords: fm.coords(e),
                        quad: &topo.physical_quadrature[e],
                        v_old: el.map(|a| h.fluid[a].v),
                        a_old: el.map(|a| h.fluid[a].a),
                        body: el.map(|a| ctx.fluid_body[a]),
                    };
                    let xl: Vec<f64> = ld.iter().map(|&i| x[i]).collect();
                    let (r, k) = local!(12, &xl, mode, |xs, rs| {
                        fluid_element_residual(&d, fl, ts, xs, rs);
                        Ok(())
                    })?;
                    Ok(Local { dofs: ld, r, k })
                }
                Task::Neumann(i) => {
                    let q = &topo.neumann_quadrature[i];
                    dofs.fluid_local(&fm.elements[q.element], &mut ld);
                    let tr = data.neumann_traction(q.x, ctx.t, q.normal, q.line);
                    let mut r = vec![0.0; 12];
                    fluid_neumann_residual(&shape_values(q.fluid_xi), q.w, tr, &mut r);
                    Ok(Local { dofs: ld, r, k: Vec::new() })
                }
                Task::FluidFace(i, is_ghost) => {
                    let fi = topo.cip_faces.faces[i];
                    let face = &fm.interior_faces[fi];
                    let [a, b] = face.elements;
                    let g = face_geometry(
                        [fm.elements[a], fm.elements[b]],
                        [fm.coords(a), fm.coords(b)],
                        face.local_edges,
                        topo.cip_faces.h[i],
                    );
                    dofs.fluid_local(&g.nodes, &mut ld);
                    let xl: Vec<f64> = ld.iter().map(|&i| x[i]).collect();
                    let (r, k) = local!(18, &xl, mode, |xs, rs| {
                        fluid_face_residual(&g, is_ghost, fl, st, ts, xs, rs);
                        Ok(())
                    })?;
                    Ok(Local { dofs: ld, r, k })
                }
                Task::PoroElement(e) => {
                    let pd = model.poro.as_ref().unwrap();
                    let el = pd.mesh.elements[e];
                    dofs.poro_local(&el, &mut ld);
                    let h = ctx.history;
                    let d = PoroElementData {
                        element: e,
                        ref_coords: pd.mesh.coords(e),
                        hist: h.poro_history(&el),
                        phi_old: h.phi[e],
                        phi_rate_old: h.phi_rate[e],
                        body_fluid: el.map(|a| ctx.poro_fluid_body[a]),
                        body_solid: el.map(|a| ctx.poro_solid_body[a]),
                        flux_edges: &pd.flux_edges[e],
                    };
                    let xl: Vec<f64> = ld.iter().map(|&i| x[i]).collect();
                    let prm = &pd.params;
                    let (r, k) = local!(20, &xl, mode, |xs, rs| poro_element_residual(&d, fl, prm, ts, xs, rs))?;
                    Ok(Local { dofs: ld, r, k })
                }
                Task::PoroFace(i) => {
                    let pd = model.poro.as_ref().unwrap();
                    let g = &pd.faces[i];
                    dofs.poro_local(&g.nodes, &mut ld);
                    let xl: Vec<f64> = ld.iter().map(|&i| x[i]).collect();
                    let prm = &pd.params;
                    let (r, k) = local!(30, &xl, mode, |xs, rs| {
                        poro_face_residual(g, fl, prm, st, ts, xs, rs);
                        Ok(())
                    })?;
                    Ok(Local { dofs: ld, r, k })
                }
                Task::Interface(i) => {
                    let pd = model.poro.as_ref().unwrap();
                    let q = &topo.interface_quadrature[i];
                    let fel = fm.elements[q.element];
                    let pel = pd.mesh.elements[q.poro_element];
                    dofs.fluid_local(&fel, &mut ld);
                    dofs.poro_local(&pel, &mut ld);
                    debug_assert_eq!(ld.len(), PORO + 20);
                    let ref_coords = pd.mesh.coords(q.poro_element);
                    let np = shape_values(q.poro_xi);
                    let mut x_ref = [0.0; 2];
                    for a in 0..4 {
                        x_ref[0] += np[a] * ref_coords[a][0];
                        x_ref[1] += np[a] * ref_coords[a][1];
                    }
                    let d = InterfacePointData {
                        fluid_coords: fm.coords(q.element),
                        fluid_xi: q.fluid_xi,
                        poro_element: q.poro_element,
                        poro_ref_coords: ref_coords,
                        poro_xi: q.poro_xi,
                        poro_hist: ctx.history.poro_history(&pel),
                        normal: q.normal,
                        w: q.w,
                        h_gamma: q.h_gamma,
                        jumps: data.jumps(q.x, x_ref, ctx.t, q.normal),
                    };
                    let xl: Vec<f64> = ld.iter().map(|&i| x[i]).collect();
                    let (cfg, prm) = (&model.nitsche, &pd.params);
                    let (r, k) =
                        local!(32, &xl, mode, |xs, rs| interface_residual(&d, cfg, fl, prm, st, ts, Terms::ALL, xs, rs))?;
                    Ok(Local { dofs: ld, r, k })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    // Dirichlet rows
    let n = dofs.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &(node, comps) in &model.fluid_dirichlet {
        if dofs.fluid_index[node].is_none() {
            continue;
        }
        let g = data.fluid_velocity_bc(fm.nodes[node], ctx.t);
        for i in 0..2 {
            if comps[i] {
                fixed[dofs.fluid_velocity(node, i).unwrap()] = Some(g[i]);
            }
        }
    }
    if let Some(pd) = &model.poro {
        for &(node, comp) in &pd.dirichlet {
            fixed[dofs.poro(node, comp)] = Some(data.poro_bc(pd.mesh.nodes[node], ctx.t, comp));
        }
    }

    let mut residual = vec![0.0; n];
    let nnz: usize = locals.iter().map(|l| l.k.len()).sum();
    let mut triplets = Vec::with_capacity(if mode.is_some() { nnz + n } else { 0 });
    for l in &locals {
        let m = l.dofs.len();
        for (a, &ga) in l.dofs.iter().enumerate() {
            if fixed[ga].is_some() {
                continue;
            }
            residual[ga] += l.r[a];
            if !l.k.is_empty() {
                for (b, &gb) in l.dofs.iter().enumerate() {
                    let v = l.k[a * m + b];
                    if v != 0.0 {
                        triplets.push(Triplet::new(ga, gb, v));
                    }
                }
            }
        }
    }
    for (i, g) in fixed.iter().enumerate() {
        if let Some(g) = g {
            residual[i] = x[i] - g;
            if mode.is_some() {
                triplets.push(Triplet::new(i, i, 1.0));
            }
        }
    }
    Ok(Assembled { residual, triplets })
}

/// Dense copy of the assembled Jacobian, for tests and diagnostics.
pub fn dense_jacobian(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Vec<Vec<f64>> {
    let mut k = vec![vec![0.0; n]; n];
    for t in triplets {
        k[t.row][t.col] += t.val;
    }
    k
}
