//! Bilinear quadrilateral meshes, interior faces and element maps.

use crate::error::{Error, Result};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

/// Local corner coordinates in counterclockwise order.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Interior face: the edge shared by two elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub elements: [usize; 2],
    /// Local edge index in each element (edge `e` joins local nodes `e` and `e+1`).
    pub local_edges: [usize; 2],
    /// Global nodes of the edge, ordered as traversed by `elements[0]`.
    pub nodes: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub local_edge: usize,
    /// Ordered counterclockwise with respect to the element.
    pub nodes: [usize; 2],
    pub tag: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    /// Boundary edge (sorted node pair) to label.
    pub boundary_tags: BTreeMap<(usize, usize), String>,
    pub interior_faces: Vec<Face>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// Subset of interior faces with their length scale.
#[derive(Clone, Debug, Default)]
pub struct FaceSet {
    pub faces: Vec<usize>,
    pub h: Vec<f64>,
}

/// Bilinear map evaluated at a local point.
#[derive(Clone, Copy, Debug)]
pub struct ShapeEval {
    pub n: [f64; 4],
    /// Physical gradients of the shape functions.
    pub dn: [[f64; 2]; 4],
    pub x: [f64; 2],
    /// `jac[i][a] = ∂x_i/∂ξ_a`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

pub fn shape_values(xi: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
    }
    n
}

pub fn shape_local_gradients(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        g[a][0] = 0.25 * c[0] * (1.0 + c[1] * xi[1]);
        g[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi[0]);
    }
    g
}

/// Evaluates the bilinear map of a quadrilateral given by its corner coordinates.
pub fn map_quad(coords: &[[f64; 2]; 4], xi: [f64; 2]) -> ShapeEval {
    let n = shape_values(xi);
    let g = shape_local_gradients(xi);
    let mut x = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            x[i] += n[a] * coords[a][i];
            for k in 0..2 {
                jac[i][k] += coords[a][i] * g[a][k];
            }
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
    let mut dn = [[0.0; 2]; 4];
    for a in 0..4 {
        for i in 0..2 {
            dn[a][i] = g[a][0] * inv[0][i] + g[a][1] * inv[1][i];
        }
    }
    ShapeEval { n, dn, x, jac, det }
}

/// Physical second derivatives of the shape functions, `h[a][i][j] = ∂²N_a/∂x_i∂x_j`.
pub fn shape_hessians(coords: &[[f64; 2]; 4], xi: [f64; 2]) -> [[[f64; 2]; 2]; 4] {
    let s = map_quad(coords, xi);
    let j = s.jac;
    let d = s.det;
    let inv = [[j[1][1] / d, -j[0][1] / d], [-j[1][0] / d, j[0][0] / d]];
    // Only the mixed local derivative of a bilinear function is nonzero.
    let mut xmix = [0.0; 2];
    for a in 0..4 {
        let c = CORNERS[a];
        for k in 0..2 {
            xmix[k] += coords[a][k] * 0.25 * c[0] * c[1];
        }
    }
    let mut h = [[[0.0; 2]; 2]; 4];
    for a in 0..4 {
        let c = CORNERS[a];
        let nmix = 0.25 * c[0] * c[1];
        let corr = nmix - (s.dn[a][0] * xmix[0] + s.dn[a][1] * xmix[1]);
        // Local Hessian is [[0, corr], [corr, 0]] after removing the geometric part.
        for p in 0..2 {
            for q in 0..2 {
                h[a][p][q] = corr * (inv[0][p] * inv[1][q] + inv[1][p] * inv[0][q]);
            }
        }
    }
    h
}

/// Local coordinates along edge `e` at parameter `s ∈ [0,1]` from local node `e` to `e+1`.
pub fn edge_local(e: usize, s: f64) -> [f64; 2] {
    let a = CORNERS[e];
    let b = CORNERS[(e + 1) % 4];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh, validating orientation and deriving faces and boundary edges.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        boundary_tags: BTreeMap<(usize, usize), String>,
    ) -> Result<Mesh> {
        for (e, conn) in elements.iter().enumerate() {
            for &n in conn {
                if n >= nodes.len() {
                    return Err(Error::InvalidArgument(format!("element {e} references missing node {n}")));
                }
            }
            let coords = conn.map(|n| nodes[n]);
            for c in CORNERS {
                if map_quad(&coords, c).det <= 0.0 {
                    return Err(Error::InvalidArgument(format!("inverted element {e}")));
                }
            }
        }
        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut interior_faces = Vec::new();
        for (e, conn) in elements.iter().enumerate() {
            for le in 0..4 {
                let (a, b) = (conn[le], conn[(le + 1) % 4]);
                match edge_owner.remove(&key(a, b)) {
                    Some((e0, le0)) => {
                        let c0 = elements[e0];
                        interior_faces.push(Face {
                            elements: [e0, e],
                            local_edges: [le0, le],
                            nodes: [c0[le0], c0[(le0 + 1) % 4]],
                        });
                    }
                    None => {
                        edge_owner.insert(key(a, b), (e, le));
                    }
                }
            }
        }
        let mut boundary_edges: Vec<BoundaryEdge> = edge_owner
            .into_iter()
            .map(|(k, (e, le))| BoundaryEdge {
                element: e,
                local_edge: le,
                nodes: [elements[e][le], elements[e][(le + 1) % 4]],
                tag: boundary_tags.get(&k).cloned(),
            })
            .collect();
        boundary_edges.sort_by_key(|b| (b.element, b.local_edge));
        for k in boundary_tags.keys() {
            if !boundary_edges.iter().any(|b| key(b.nodes[0], b.nodes[1]) == *k) {
                return Err(Error::InvalidArgument(format!(
                    "tagged edge ({}, {}) is not a boundary edge",
                    k.0, k.1
                )));
            }
        }
        Ok(Mesh { nodes, elements, boundary_tags, interior_faces, boundary_edges })
    }

    pub fn coords(&self, e: usize) -> [[f64; 2]; 4] {
        self.elements[e].map(|n| self.nodes[n])
    }

    pub fn reference_map(&self, e: usize, xi: [f64; 2]) -> ShapeEval {
        map_quad(&self.coords(e), xi)
    }

    /// Local coordinates of a physical point and whether it lies in the element.
    pub fn inverse_map(&self, e: usize, x: [f64; 2]) -> Result<([f64; 2], bool)> {
        inverse_map_quad(&self.coords(e), x)
    }

    /// Longest diagonal.
    pub fn diameter(&self, e: usize) -> f64 {
        let c = self.coords(e);
        dist(c[0], c[2]).max(dist(c[1], c[3]))
    }

    pub fn area(&self, e: usize) -> f64 {
        polygon_area(&self.coords(e))
    }

    pub fn face_set(&self, faces: Vec<usize>) -> FaceSet {
        let h = faces
            .iter()
            .map(|&f| {
                let [a, b] = self.interior_faces[f].elements;
                self.diameter(a).max(self.diameter(b))
            })
            .collect();
        FaceSet { faces, h }
    }

    pub fn all_faces(&self) -> FaceSet {
        self.face_set((0..self.interior_faces.len()).collect())
    }

    /// Nodes lying on edges with the given tag.
    pub fn tagged_nodes(&self, tag: &str) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_tags
            .iter()
            .filter(|(_, t)| t.as_str() == tag)
            .flat_map(|(k, _)| [k.0, k.1])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Elements sharing each node.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (e, conn) in self.elements.iter().enumerate() {
            for &n in conn {
                out[n].push(e);
            }
        }
        out
    }

    /// Serializes to the plain-text mesh format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {} elements {}", self.nodes.len(), self.elements.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "n {} {:.17e} {:.17e}", i, p[0], p[1]);
        }
        for (i, c) in self.elements.iter().enumerate() {
            let _ = writeln!(s, "e {} {} {} {} {}", i, c[0], c[1], c[2], c[3]);
        }
        for ((a, b), t) in &self.boundary_tags {
            let _ = writeln!(s, "b {} {} {}", t, a, b);
        }
        s
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Signed shoelace area (positive for counterclockwise).
pub fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    let mut a = 0.0;
    for i in 0..n {
        let (u, v) = (p[i], p[(i + 1) % n]);
        a += u[0] * v[1] - v[0] * u[1];
    }
    0.5 * a
}

pub fn inverse_map_quad(coords: &[[f64; 2]; 4], x: [f64; 2]) -> Result<([f64; 2], bool)> {
    let diam = dist(coords[0], coords[2]).max(dist(coords[1], coords[3]));
    let mut xi = [0.0, 0.0];
    for _ in 0..50 {
        let s = map_quad(coords, xi);
        let r = [x[0] - s.x[0], x[1] - s.x[1]];
        let j = s.jac;
        let d = s.det;
        let dxi = [(j[1][1] * r[0] - j[0][1] * r[1]) / d, (-j[1][0] * r[0] + j[0][0] * r[1]) / d];
        xi[0] += dxi[0];
        xi[1] += dxi[1];
        if !(xi[0].is_finite() && xi[1].is_finite()) {
            break;
        }
        // round-off in x is relative to the coordinate magnitude, not the element size
        let scale = diam + x[0].abs() + x[1].abs();
        if (r[0] * r[0] + r[1] * r[1]).sqrt() <= 1e-15 * scale || dxi[0].abs() + dxi[1].abs() < 1e-13 {
            let s = map_quad(coords, xi);
            if dist(s.x, x) <= 1e-12 * scale {
                let eps = 1e-10;
                let inside = xi.iter().all(|&c| c >= -1.0 - eps && c <= 1.0 + eps);
                return Ok((xi, inside));
            }
        }
    }
    Err(Error::InverseMapFailed)
}

/// Structured grid of `nx × ny` elements, rotated rigidly about its center.
pub fn build_structured_mesh(
    origin: [f64; 2],
    extents: [f64; 2],
    nx: usize,
    ny: usize,
    rotation: f64,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(extents[0] > 0.0) || !(extents[1] > 0.0) {
        return Err(Error::InvalidArgument("structured mesh needs positive extents and counts".into()));
    }
    let c = [origin[0] + 0.5 * extents[0], origin[1] + 0.5 * extents[1]];
    let (sn, cs) = rotation.sin_cos();
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let p = [
                origin[0] + extents[0] * i as f64 / nx as f64 - c[0],
                origin[1] + extents[1] * j as f64 / ny as f64 - c[1],
            ];
            nodes.push([c[0] + cs * p[0] - sn * p[1], c[1] + sn * p[0] + cs * p[1]]);
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut tags = BTreeMap::new();
    for i in 0..nx {
        tags.insert(key(id(i, 0), id(i + 1, 0)), "bottom".to_string());
        tags.insert(key(id(i, ny), id(i + 1, ny)), "top".to_string());
    }
    for j in 0..ny {
        tags.insert(key(id(0, j), id(0, j + 1)), "left".to_string());
        tags.insert(key(id(nx, j), id(nx, j + 1)), "right".to_string());
    }
    Mesh::new(nodes, elements, tags)
}

/// Parses the plain-text mesh format.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let perr = |line: usize, msg: String| Error::MeshParse { line, msg };
    let mut header: Option<(usize, usize)> = None;
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut raw_elements: Vec<(usize, i64, [i64; 4])> = Vec::new();
    let mut element_ids: HashMap<i64, usize> = HashMap::new();
    let mut raw_tags: Vec<(usize, String, i64, i64)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tok: Vec<&str> = content.split_whitespace().collect();
        let int = |s: &str| s.parse::<i64>().map_err(|_| perr(line, format!("expected integer, found '{s}'")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| perr(line, format!("expected number, found '{s}'")));
        match tok[0] {
            "nodes" => {
                if tok.len() != 4 || tok[2] != "elements" {
                    return Err(perr(line, "header must read 'nodes N elements E'".into()));
                }
                header = Some((int(tok[1])? as usize, int(tok[3])? as usize));
            }
            "n" => {
                if tok.len() != 4 {
                    return Err(perr(line, "node line must read 'n id x y'".into()));
                }
                let id = int(tok[1])?;
                if node_ids.insert(id, nodes.len()).is_some() {
                    return Err(perr(line, format!("duplicate node id {id}")));
                }
                nodes.push([float(tok[2])?, float(tok[3])?]);
            }
            "e" => {
                if tok.len() != 6 {
                    return Err(perr(line, "element line must read 'e id n0 n1 n2 n3'".into()));
                }
                let id = int(tok[1])?;
                if element_ids.insert(id, raw_elements.len()).is_some() {
                    return Err(perr(line, format!("duplicate element id {id}")));
                }
                raw_elements.push((line, id, [int(tok[2])?, int(tok[3])?, int(tok[4])?, int(tok[5])?]));
            }
            "b" => {
                if tok.len() != 4 {
                    return Err(perr(line, "boundary line must read 'b tag na nb'".into()));
                }
                raw_tags.push((line, tok[1].to_string(), int(tok[2])?, int(tok[3])?));
            }
            other => return Err(perr(line, format!("unknown record '{other}'"))),
        }
    }
    let (nn, ne) = header.ok_or_else(|| perr(0, "missing header".into()))?;
    if nn != nodes.len() || ne != raw_elements.len() {
        return Err(perr(
            0,
            format!("header declares {nn} nodes and {ne} elements, found {} and {}", nodes.len(), raw_elements.len()),
        ));
    }
    let lookup = |line: usize, id: i64| {
        node_ids.get(&id).copied().ok_or_else(|| perr(line, format!("unknown node id {id}")))
    };
    let mut elements = Vec::with_capacity(ne);
    for (line, id, c) in &raw_elements {
        let conn = [lookup(*line, c[0])?, lookup(*line, c[1])?, lookup(*line, c[2])?, lookup(*line, c[3])?];
        let coords = conn.map(|n| nodes[n]);
        if CORNERS.iter().any(|&xi| map_quad(&coords, xi).det <= 0.0) {
            return Err(perr(*line, format!("inverted element {id}")));
        }
        elements.push(conn);
    }
    let mut tags = BTreeMap::new();
    for (line, t, a, b) in raw_tags {
        tags.insert(key(lookup(line, a)?, lookup(line, b)?), t);
    }
    Mesh::new(nodes, elements, tags)
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

/// Uniform bucket grid over element bounding boxes for point and segment queries.
#[derive(Clone, Debug)]
pub struct ElementLocator {
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl ElementLocator {
    pub fn new(mesh: &Mesh) -> ElementLocator {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.nodes {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let ne = mesh.elements.len().max(1);
        let side = (ne as f64).sqrt().ceil() as usize;
        let dims = [side.max(1), side.max(1)];
        let cell = [
            ((hi[0] - lo[0]) / dims[0] as f64).max(1e-300),
            ((hi[1] - lo[1]) / dims[1] as f64).max(1e-300),
        ];
        let mut loc = ElementLocator { lo, cell, dims, buckets: vec![Vec::new(); dims[0] * dims[1]] };
        for e in 0..mesh.elements.len() {
            let (a, b) = bbox(&mesh.coords(e));
            let (i0, j0) = loc.cell_of(a);
            let (i1, j1) = loc.cell_of(b);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * dims[0] + i].push(e);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let f = |k: usize| {
            let c = ((p[k] - self.lo[k]) / self.cell[k]).floor();
            c.max(0.0).min((self.dims[k] - 1) as f64) as usize
        };
        (f(0), f(1))
    }

    /// Elements whose bounding boxes may intersect the box `[a, b]`.
    pub fn candidates(&self, a: [f64; 2], b: [f64; 2]) -> Vec<usize> {
        let (i0, j0) = self.cell_of([a[0].min(b[0]), a[1].min(b[1])]);
        let (i1, j1) = self.cell_of([a[0].max(b[0]), a[1].max(b[1])]);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend_from_slice(&self.buckets[j * self.dims[0] + i]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Element containing `x`, if any.
    pub fn locate(&self, mesh: &Mesh, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        for e in self.candidates(x, x) {
            if let Ok((xi, true)) = mesh.inverse_map(e, x) {
                return Some((e, xi));
            }
        }
        None
    }
}

pub fn bbox(p: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for q in p {
        for i in 0..2 {
            lo[i] = lo[i].min(q[i]);
            hi[i] = hi[i].max(q[i]);
        }
    }
    (lo, hi)
}

/// Gauss–Legendre points and weights on `[-1, 1]`.
pub fn gauss_1d(n: usize) -> Vec<(f64, f64)> {
    match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (0.6f64).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        _ => panic!("unsupported Gauss order {n}"),
    }
}

/// 2×2 tensor Gauss rule on the reference square.
pub fn gauss_2x2() -> [([f64; 2], f64); 4] {
    let a = 1.0 / 3f64.sqrt();
    [([-a, -a], 1.0), ([a, -a], 1.0), ([a, a], 1.0), ([-a, a], 1.0)]
}
