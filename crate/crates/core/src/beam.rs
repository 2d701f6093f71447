//! Flexible porous beam in a channel: mesh generation, boundary data and
//! probe evaluation.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use crate::assembly::{Model, PoroDomain, ProblemData, State};
use crate::error::{Error, Result};
use crate::mesh::{build_structured_mesh, map_quad, Mesh};
use crate::params::{FluidParams, NitscheConfig, Permeability, PorosityMode, PoroParams, TimeParams};
use crate::poro_form::{kinematics, porosity};

pub const BASE_TAG: &str = "base";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamGeometry {
    /// Channel length and height.
    pub length: f64,
    pub height: f64,
    /// Left edge of the beam and its width.
    pub a: f64,
    pub b: f64,
    /// Total beam height including the round tip.
    pub c: f64,
}

impl Default for BeamGeometry {
    fn default() -> Self {
        BeamGeometry { length: 2.0, height: 1.0, a: 0.45, b: 0.1, c: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamSetup {
    pub geometry: BeamGeometry,
    pub nx: usize,
    pub ny: usize,
    /// Poro elements across the beam width (multiple of 4).
    pub beam_nx: usize,
    /// Poro elements along the straight part.
    pub beam_ny: usize,
    pub fluid: FluidParams,
    pub poro: PoroParams,
    pub nitsche: NitscheConfig,
    pub time: TimeParams,
    /// Reference positions of the upstream and downstream probes.
    pub probes: [[f64; 2]; 2],
}

impl Default for BeamSetup {
    fn default() -> Self {
        BeamSetup {
            geometry: BeamGeometry::default(),
            nx: 100,
            ny: 50,
            beam_nx: 12,
            beam_ny: 102,
            fluid: FluidParams { rho: 0.1, mu: 0.01 },
            poro: PoroParams {
                phi0: 0.5,
                permeability: Permeability::KozenyCarman { k_ref: 1e-5, phi_ref: 0.5 },
                youngs: 100.0,
                poisson: 0.3,
                bulk: 100.0,
                rho_s0: 0.2,
                porosity_mode: PorosityMode::Constitutive,
            },
            nitsche: NitscheConfig::default(),
            time: TimeParams { theta: 1.0, dt: 0.02 },
            probes: [[0.45, 0.4], [0.55, 0.4]],
        }
    }
}

/// Merges coincident nodes of independently generated blocks.
struct Builder {
    nodes: Vec<[f64; 2]>,
    index: HashMap<(i64, i64), usize>,
    elements: Vec<[usize; 4]>,
}

impl Builder {
    fn node(&mut self, p: [f64; 2]) -> usize {
        let k = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        if let Some(&i) = self.index.get(&k) {
            return i;
        }
        self.nodes.push(p);
        self.index.insert(k, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Adds an `n × m` block from a map of the unit square.
    fn block(&mut self, n: usize, m: usize, f: impl Fn(f64, f64) -> [f64; 2]) {
        let mut ids = vec![vec![0; m + 1]; n + 1];
        for (i, col) in ids.iter_mut().enumerate() {
            for (j, id) in col.iter_mut().enumerate() {
                *id = self.node(f(i as f64 / n as f64, j as f64 / m as f64));
            }
        }
        for i in 0..n {
            for j in 0..m {
                self.elements.push([ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]]);
            }
        }
    }
}

/// Transfinite map of a patch bounded by four curves, each parametrized on
/// [0,1]: `bottom(s)`, `right(t)`, `top(s)`, `left(t)`, with matching corners.
fn coons(
    bottom: &dyn Fn(f64) -> [f64; 2],
    right: &dyn Fn(f64) -> [f64; 2],
    top: &dyn Fn(f64) -> [f64; 2],
    left: &dyn Fn(f64) -> [f64; 2],
    s: f64,
    t: f64,
) -> [f64; 2] {
    let (p00, p10, p01, p11) = (bottom(0.0), bottom(1.0), top(0.0), top(1.0));
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = (1.0 - t) * bottom(s)[i] + t * top(s)[i] + (1.0 - s) * left(t)[i] + s * right(t)[i]
            - ((1.0 - s) * (1.0 - t) * p00[i] + s * (1.0 - t) * p10[i] + (1.0 - s) * t * p01[i] + s * t * p11[i]);
    }
    out
}

fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Body-fitted beam mesh: a structured straight part and a half-disk tip
/// made of a central rectangle surrounded by three curved blocks.
pub fn beam_mesh(g: &BeamGeometry, nx: usize, ny: usize) -> Result<Mesh> {
    if nx < 4 || nx % 4 != 0 || ny == 0 {
        return Err(Error::InvalidArgument("beam mesh needs a multiple of 4 elements across and ny > 0".into()));
    }
    let r = 0.5 * g.b;
    let y0 = g.c - r;
    if !(y0 > 0.0) {
        return Err(Error::InvalidArgument("beam shorter than its tip radius".into()));
    }
    let xc = g.a + r;
    let mut bld = Builder { nodes: Vec::new(), index: HashMap::new(), elements: Vec::new() };
    bld.block(nx, ny, |s, t| [g.a + s * g.b, t * y0]);
    let m = nx / 4;
    let arc = |ang: f64| [xc + r * ang.cos(), y0 + r * ang.sin()];
    let ql = [xc - 0.5 * r, y0];
    let qr = [xc + 0.5 * r, y0];
    let qtl = [xc - 0.5 * r, y0 + 0.5 * r];
    let qtr = [xc + 0.5 * r, y0 + 0.5 * r];
    // central rectangle, then three curved blocks between it and the arc
    bld.block(nx / 2, m, |s, t| [ql[0] + s * r, y0 + t * 0.5 * r]);
    bld.block(m, m, |s, t| {
        coons(
            &|s| lerp([g.a, y0], ql, s),
            &|t| lerp(ql, qtl, t),
            &|s| lerp(arc(0.75 * PI), qtl, s),
            &|t| arc(PI - t * 0.25 * PI),
            s,
            t,
        )
    });
    bld.block(m, m, |s, t| {
        coons(
            &|s| lerp(qr, [g.a + g.b, y0], s),
            &|t| arc(t * 0.25 * PI),
            &|s| lerp(qtr, arc(0.25 * PI), s),
            &|t| lerp(qr, qtr, t),
            s,
            t,
        )
    });
    bld.block(nx / 2, m, |s, t| {
        coons(
            &|s| lerp(qtl, qtr, s),
            &|t| lerp(qtr, arc(0.25 * PI), t),
            &|s| arc(0.75 * PI - s * 0.5 * PI),
            &|t| lerp(qtl, arc(0.75 * PI), t),
            s,
            t,
        )
    });
    let Builder { nodes, elements, .. } = bld;
    let mut tags = BTreeMap::new();
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for el in &elements {
        for k in 0..4 {
            let (a, b) = (el[k], el[(k + 1) % 4]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    for (&(a, b), &c) in &count {
        if c == 1 && nodes[a][1].abs() < 1e-12 && nodes[b][1].abs() < 1e-12 {
            tags.insert((a, b), BASE_TAG.to_string());
        }
    }
    Mesh::new(nodes, elements, tags)
}

/// Inflow, walls and outlet of the channel. The poro data are homogeneous.
#[derive(Clone, Copy, Debug)]
pub struct BeamData {
    pub height: f64,
}

impl BeamData {
    pub fn inflow(&self, y: f64, t: f64) -> f64 {
        let yy = y / self.height;
        let ramp = if t <= 2.0 { 2.0 - 2.0 * (0.5 * PI * t).cos() } else { 4.0 };
        0.2 * (yy - yy * yy) * ramp
    }
}

impl ProblemData for BeamData {
    fn fluid_velocity_bc(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        if x[0].abs() < 1e-12 {
            [self.inflow(x[1], t), 0.0]
        } else {
            [0.0, 0.0]
        }
    }
}

pub fn build_beam(setup: &BeamSetup) -> Result<Model> {
    let g = &setup.geometry;
    let fluid_mesh = build_structured_mesh([0.0, 0.0], [g.length, g.height], setup.nx, setup.ny, 0.0)?;
    let pm = beam_mesh(g, setup.beam_nx, setup.beam_ny)?;
    let base = pm.tagged_nodes(BASE_TAG);
    let mut dirichlet = Vec::new();
    for &n in &base {
        dirichlet.extend([(n, 1), (n, 2), (n, 3)]);
    }
    let poro = PoroDomain::new(pm, setup.poro, vec![BASE_TAG.to_string()], dirichlet)?;
    let mut model = Model::new(fluid_mesh, Some(poro), setup.fluid, setup.time);
    model.nitsche = setup.nitsche;
    let mut comps: BTreeMap<usize, [bool; 2]> = BTreeMap::new();
    for tag in ["left", "top", "bottom"] {
        for n in model.fluid_mesh.tagged_nodes(tag) {
            comps.insert(n, [true, true]);
        }
    }
    for n in model.fluid_mesh.tagged_nodes("right") {
        comps.entry(n).or_insert([false, true]);
    }
    model.fluid_dirichlet = comps.into_iter().collect();
    Ok(model)
}

/// Porosity, pressure and displacement at a reference point of the poro mesh.
pub fn probe(model: &Model, s: &State, x_ref: [f64; 2]) -> Result<(f64, f64, [f64; 2])> {
    let pd = model.poro.as_ref().ok_or_else(|| Error::InvalidArgument("no poro domain".into()))?;
    for (e, el) in pd.mesh.elements.iter().enumerate() {
        let Ok((xi, inside)) = pd.mesh.inverse_map(e, x_ref) else { continue };
        if !inside {
            continue;
        }
        let sm = map_quad(&pd.mesh.coords(e), xi);
        let mut g = [[0.0; 2]; 2];
        let mut p = 0.0;
        let mut u = [0.0; 2];
        for (a, &n) in el.iter().enumerate() {
            for i in 0..2 {
                u[i] += sm.n[a] * s.poro[n].u[i];
                for j in 0..2 {
                    g[i][j] += s.poro[n].u[i] * sm.dn[a][j];
                }
            }
            p += sm.n[a] * s.poro[n].p;
        }
        let kin = kinematics(g, e)?;
        return Ok((porosity(kin.j, p, &pd.params)?, p, u));
    }
    Err(Error::InvalidArgument(format!("probe {x_ref:?} outside the poro mesh")))
}

/// Poro node at the beam tip.
pub fn tip_node(model: &Model) -> Option<usize> {
    let pd = model.poro.as_ref()?;
    (0..pd.mesh.nodes.len()).max_by(|&a, &b| pd.mesh.nodes[a][1].total_cmp(&pd.mesh.nodes[b][1]))
}
