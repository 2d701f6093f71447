//! Classification of background elements against the poroelastic boundary and
//! straight Neumann cut lines, with physical-part and interface quadratures.
//!
//! The physical fluid part of an element is `E ∩ H_1 ∩ … ∩ H_m \ P`, where the
//! `H_i` are the fluid half-planes of the cut lines and `P` is the region enclosed
//! by the deformed poro boundary. Half-planes are clipped directly; `P` is removed
//! by tracing the boundary of the difference. All in/out decisions are derived
//! from orientation signs with a fixed tie-break, so neighbouring edges of an
//! element always agree on where a segment crosses.

use crate::error::{Error, Result};
use crate::mesh::{bbox, edge_local, gauss_1d, gauss_2x2, polygon_area, ElementLocator, FaceSet, Mesh};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolylineTag {
    FluidPoroInterface,
    CutNeumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    /// Carries interface coupling terms.
    Interface,
    /// Part of the poro boundary that only closes the enclosed region (walls).
    Closure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub kind: SegmentKind,
    /// Index into the poro mesh boundary edges, if the segment is one.
    pub edge: Option<usize>,
    /// Unit normal pointing into the fluid (outward poro normal n^P).
    pub normal: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfacePolyline {
    pub segments: Vec<Segment>,
    pub tag: PolylineTag,
}

impl InterfacePolyline {
    /// Straight cut line through `point` whose fluid side is the side `normal` points into.
    pub fn cut_line(point: [f64; 2], normal: [f64; 2], half_length: f64) -> InterfacePolyline {
        let l = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        let n = [normal[0] / l, normal[1] / l];
        let t = [-n[1], n[0]];
        InterfacePolyline {
            segments: vec![Segment {
                a: [point[0] - half_length * t[0], point[1] - half_length * t[1]],
                b: [point[0] + half_length * t[0], point[1] + half_length * t[1]],
                kind: SegmentKind::Interface,
                edge: None,
                normal: n,
            }],
            tag: PolylineTag::CutNeumann,
        }
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| crate::mesh::dist(s.a, s.b)).sum()
    }
}

/// Builds the closed deformed boundary of the poro mesh, counterclockwise.
///
/// Boundary edges whose tag is in `closure_tags` become closure segments.
pub fn extract_interface(
    poro: &Mesh,
    u: &[[f64; 2]],
    closure_tags: &[&str],
) -> Result<InterfacePolyline> {
    if u.len() != poro.nodes.len() {
        return Err(Error::InvalidArgument("displacement must be given at every poro node".into()));
    }
    let nb = poro.boundary_edges.len();
    if nb == 0 {
        return Err(Error::InvalidInterface("poro mesh has no boundary".into()));
    }
    let mut by_start = std::collections::HashMap::new();
    for (i, b) in poro.boundary_edges.iter().enumerate() {
        if by_start.insert(b.nodes[0], i).is_some() {
            return Err(Error::InvalidInterface("boundary is not a single simple loop".into()));
        }
    }
    let pos = |n: usize| [poro.nodes[n][0] + u[n][0], poro.nodes[n][1] + u[n][1]];
    let mut order = Vec::with_capacity(nb);
    let mut cur = 0usize;
    for _ in 0..nb {
        order.push(cur);
        let next_node = poro.boundary_edges[cur].nodes[1];
        cur = *by_start
            .get(&next_node)
            .ok_or_else(|| Error::InvalidInterface("open boundary polyline".into()))?;
        if cur == 0 {
            break;
        }
    }
    if order.len() != nb || cur != 0 {
        return Err(Error::InvalidInterface("boundary is not a single closed loop".into()));
    }
    let segments: Vec<Segment> = order
        .iter()
        .map(|&i| {
            let be = &poro.boundary_edges[i];
            let a = pos(be.nodes[0]);
            let b = pos(be.nodes[1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let closure = be.tag.as_deref().map_or(false, |t| closure_tags.contains(&t));
            Segment {
                a,
                b,
                kind: if closure { SegmentKind::Closure } else { SegmentKind::Interface },
                edge: Some(i),
                normal: [d[1] / l, -d[0] / l],
            }
        })
        .collect();
    check_simple(&segments)?;
    Ok(InterfacePolyline { segments, tag: PolylineTag::FluidPoroInterface })
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn check_simple(segs: &[Segment]) -> Result<()> {
    let n = segs.len();
    let area: f64 = segs.iter().map(|s| s.a[0] * s.b[1] - s.b[0] * s.a[1]).sum::<f64>() * 0.5;
    if !(area > 0.0) {
        return Err(Error::InvalidInterface("deformed boundary is not positively oriented".into()));
    }
    let boxes: Vec<_> = segs.iter().map(|s| bbox(&[s.a, s.b])).collect();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a0, a1) = boxes[i];
            let (b0, b1) = boxes[j];
            if a1[0] < b0[0] || b1[0] < a0[0] || a1[1] < b0[1] || b1[1] < a0[1] {
                continue;
            }
            let (p, q) = (&segs[i], &segs[j]);
            let d1 = orient(p.a, p.b, q.a);
            let d2 = orient(p.a, p.b, q.b);
            let d3 = orient(q.a, q.b, p.a);
            let d4 = orient(q.a, q.b, p.b);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return Err(Error::InvalidInterface("self-intersecting deformed boundary".into()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementClass {
    Fluid,
    Cut,
    Void,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub xi: [f64; 2],
    pub x: [f64; 2],
    pub w: f64,
}

/// Quadrature point on the fluid-poro interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfacePoint {
    pub element: usize,
    pub fluid_xi: [f64; 2],
    pub x: [f64; 2],
    pub w: f64,
    /// Fluid outward normal n^F = −n^P.
    pub normal: [f64; 2],
    /// Poro boundary edge index.
    pub edge: usize,
    pub poro_element: usize,
    pub poro_xi: [f64; 2],
    pub h_gamma: f64,
}

/// Quadrature point on a Neumann cut line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeumannPoint {
    pub element: usize,
    pub fluid_xi: [f64; 2],
    pub x: [f64; 2],
    pub w: f64,
    /// Outward fluid normal.
    pub normal: [f64; 2],
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct CutTopology {
    pub classification: Vec<ElementClass>,
    pub physical_quadrature: Vec<Vec<QuadPoint>>,
    pub physical_area: Vec<f64>,
    /// Clipped physical polygons of cut elements (empty otherwise).
    pub polygons: Vec<Vec<Vec<[f64; 2]>>>,
    pub interface_quadrature: Vec<InterfacePoint>,
    pub neumann_quadrature: Vec<NeumannPoint>,
    /// Per element; zero where the element holds no interface.
    pub h_gamma: Vec<f64>,
    pub ghost_faces: FaceSet,
    pub cip_faces: FaceSet,
    pub active_nodes: Vec<bool>,
}

impl CutTopology {
    pub fn is_active_element(&self, e: usize) -> bool {
        self.classification[e] != ElementClass::Void
    }

    pub fn fluid_area(&self) -> f64 {
        self.physical_area.iter().sum()
    }
}

/// `h_Γ` of an element: element area over the interface length inside it.
pub fn interface_h_gamma(element_area: f64, interface_length: f64) -> Option<f64> {
    if interface_length > 0.0 {
        Some(element_area / interface_length)
    } else {
        None
    }
}

/// Dunavant degree-4 rule on the unit triangle: barycentric coordinates and weights (sum 1).
const TRI_RULE: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
    const W1: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
    const A2: f64 = 0.091_576_213_509_770_743_459_571_463_402_202;
    const W2: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;
    const B1: f64 = 1.0 - 2.0 * A1;
    const B2: f64 = 1.0 - 2.0 * A2;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Quadrature points and weights for a triangle (exact for total degree ≤ 4).
pub fn triangle_quadrature(t: [[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
    let area = 0.5 * orient(t[0], t[1], t[2]);
    TRI_RULE
        .iter()
        .map(|(l, w)| {
            (
                [
                    l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0],
                    l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1],
                ],
                w * area,
            )
        })
        .collect()
}

/// Triangulates a simple counterclockwise polygon by ear clipping, falling back
/// to a signed fan when no ear is found.
pub fn triangulate(poly: &[[f64; 2]]) -> Vec<[[f64; 2]; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::new();
    let scale = {
        let (lo, hi) = bbox(poly);
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).max(1e-300)
    };
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            let o = orient(a, b, c);
            if o <= 1e-14 * scale {
                if o.abs() <= 1e-14 * scale && degenerate_spike(a, b, c) {
                    continue;
                }
                if o.abs() <= 1e-14 * scale {
                    // collinear vertex: drop it
                    idx.remove(i);
                    clipped = true;
                    break;
                }
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                orient(a, b, p) > 0.0 && orient(b, c, p) > 0.0 && orient(c, a, p) > 0.0
            });
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            let p0 = poly[idx[0]];
            for k in 1..idx.len() - 1 {
                tris.push([p0, poly[idx[k]], poly[idx[k + 1]]]);
            }
            return tris;
        }
    }
    if idx.len() == 3 {
        tris.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    }
    tris
}

fn degenerate_spike(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    // b is collinear with a and c but not between them
    let d1 = [b[0] - a[0], b[1] - a[1]];
    let d2 = [c[0] - b[0], c[1] - b[1]];
    d1[0] * d2[0] + d1[1] * d2[1] < 0.0
}

/// Sutherland–Hodgman clip of a convex polygon against `(x − p)·m ≥ 0`.
pub fn clip_half_plane(poly: &[[f64; 2]], p: [f64; 2], m: [f64; 2]) -> Vec<[f64; 2]> {
    let s = |q: [f64; 2]| (q[0] - p[0]) * m[0] + (q[1] - p[1]) * m[1];
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (sa, sb) = (s(a), s(b));
        let (ina, inb) = (sa >= 0.0, sb >= 0.0);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Parameter interval of segment `a→b` inside the convex counterclockwise polygon `poly`.
pub fn clip_segment_convex(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let d = [b[0] - a[0], b[1] - a[1]];
    let n = poly.len();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        // inside: orient(p, q, x) >= 0
        let fa = orient(p, q, a);
        let fd = (q[0] - p[0]) * d[1] - (q[1] - p[1]) * d[0];
        if fd == 0.0 {
            if fa < 0.0 {
                return None;
            }
            continue;
        }
        let t = -fa / fd;
        if fd > 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
        if t0 >= t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// Winding number of `p` with respect to a closed polygon.
pub fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && orient(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

#[derive(Clone, Copy, Debug)]
struct Crossing {
    /// position along the enclosed polygon: segment index + parameter
    pk: usize,
    pt: f64,
    /// position along the element boundary: edge index + parameter
    ej: usize,
    eu: f64,
    entering: bool,
    point: [f64; 2],
}

/// Computes `E \ P` for a convex counterclockwise `E` and a closed counterclockwise `P`.
///
/// Returns `None` when the boundaries do not cross and `E` lies outside `P`.
fn subtract_region(e: &[[f64; 2]], p: &[[f64; 2]], near: &[usize]) -> Result<Option<Vec<Vec<[f64; 2]>>>> {
    let ne = e.len();
    let np = p.len();
    // side of a P vertex relative to edge line j: true = outside (strictly)
    let outside = |j: usize, q: [f64; 2]| orient(e[j], e[(j + 1) % ne], q) < 0.0;
    let mut crossings: Vec<Crossing> = Vec::new();
    for &k in near {
        let (a, b) = (p[k], p[(k + 1) % np]);
        // orientation of the element corners relative to the segment; ties count as left
        let corner_left: Vec<bool> = e.iter().map(|&c| orient(a, b, c) >= 0.0).collect();
        for j in 0..ne {
            let (oa, ob) = (outside(j, a), outside(j, b));
            if oa == ob {
                continue;
            }
            if corner_left[j] == corner_left[(j + 1) % ne] {
                continue;
            }
            let (c0, c1) = (e[j], e[(j + 1) % ne]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let f = [c1[0] - c0[0], c1[1] - c0[1]];
            let den = d[0] * f[1] - d[1] * f[0];
            let w = [c0[0] - a[0], c0[1] - a[1]];
            let (t, u) = if den != 0.0 {
                ((w[0] * f[1] - w[1] * f[0]) / den, (w[0] * d[1] - w[1] * d[0]) / den)
            } else {
                (0.5, 0.5)
            };
            let t = t.clamp(0.0, 1.0);
            let u = u.clamp(0.0, 1.0);
            crossings.push(Crossing {
                pk: k,
                pt: t,
                ej: j,
                eu: u,
                entering: oa && !ob,
                point: [c0[0] + u * f[0], c0[1] + u * f[1]],
            });
        }
    }
    if crossings.is_empty() {
        let c = centroid(e);
        if winding_number(p, c) != 0 {
            return Ok(Some(Vec::new()));
        }
        let inside_e = |q: [f64; 2]| (0..ne).all(|j| !outside(j, q));
        if near.iter().any(|&k| inside_e(p[k])) {
            return Err(Error::Geometry("poroelastic domain lies inside a single background element".into()));
        }
        return Ok(None);
    }
    if crossings.len() % 2 != 0 {
        return Err(Error::Geometry("inconsistent boundary crossings".into()));
    }
    let n = crossings.len();
    // order along P
    let mut along_p: Vec<usize> = (0..n).collect();
    along_p.sort_by(|&x, &y| {
        let (a, b) = (&crossings[x], &crossings[y]);
        (a.pk, a.pt).partial_cmp(&(b.pk, b.pt)).unwrap()
    });
    let mut along_e: Vec<usize> = (0..n).collect();
    along_e.sort_by(|&x, &y| {
        let (a, b) = (&crossings[x], &crossings[y]);
        (a.ej, a.eu).partial_cmp(&(b.ej, b.eu)).unwrap()
    });
    let mut rank_p = vec![0; n];
    let mut rank_e = vec![0; n];
    for (r, &c) in along_p.iter().enumerate() {
        rank_p[c] = r;
    }
    for (r, &c) in along_e.iter().enumerate() {
        rank_e[c] = r;
    }
    for r in 0..n {
        let (a, b) = (&crossings[along_p[r]], &crossings[along_p[(r + 1) % n]]);
        if a.entering == b.entering {
            return Err(Error::Geometry("boundary crossings do not alternate".into()));
        }
    }
    let mut visited = vec![false; n];
    let mut polys = Vec::new();
    for start in 0..n {
        if visited[start] || !crossings[start].entering {
            continue;
        }
        let mut poly = Vec::new();
        let mut c = start;
        let mut guard = 0;
        loop {
            guard += 1;
            if guard > 4 * n + 8 {
                return Err(Error::Geometry("boundary tracing did not close".into()));
            }
            visited[c] = true;
            let cc = crossings[c];
            poly.push(cc.point);
            // along E counterclockwise to the next crossing, which must be an exit
            let c2 = along_e[(rank_e[c] + 1) % n];
            let x2 = crossings[c2];
            if x2.entering {
                return Err(Error::Geometry("boundary tracing met two entries".into()));
            }
            let mut j = cc.ej;
            let mut pos = cc.eu;
            // walk corners strictly between (cc.ej, cc.eu) and (x2.ej, x2.eu)
            let same_edge_ahead = x2.ej == cc.ej && x2.eu > pos;
            if !same_edge_ahead || n == 1 {
                loop {
                    j = (j + 1) % ne;
                    poly.push(e[j]);
                    pos = 0.0;
                    if j == x2.ej && x2.eu >= pos {
                        break;
                    }
                }
            }
            visited[c2] = true;
            poly.push(x2.point);
            // backwards along P to the previous crossing, which must be an entry
            let c3 = along_p[(rank_p[c2] + n - 1) % n];
            let x3 = crossings[c3];
            // vertices with index in (x3.pk + x3.pt, x2.pk + x2.pt), walked downwards
            let mut k = x2.pk;
            if !(x3.pk == x2.pk && x3.pt < x2.pt) {
                loop {
                    poly.push(p[k]);
                    if k == (x3.pk + 1) % np {
                        break;
                    }
                    k = (k + np - 1) % np;
                }
            }
            if c3 == start {
                break;
            }
            c = c3;
        }
        let poly = dedup_points(poly);
        if poly.len() >= 3 && polygon_area(&poly) > 0.0 {
            polys.push(poly);
        }
    }
    Ok(Some(polys))
}

fn centroid(p: &[[f64; 2]]) -> [f64; 2] {
    let n = p.len() as f64;
    let s = p.iter().fold([0.0, 0.0], |s, q| [s[0] + q[0], s[1] + q[1]]);
    [s[0] / n, s[1] / n]
}

fn dedup_points(p: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let scale = {
        let (lo, hi) = bbox(&p);
        (hi[0] - lo[0]).abs().max((hi[1] - lo[1]).abs()).max(1e-300)
    };
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(p.len());
    for q in p {
        if let Some(l) = out.last() {
            if (l[0] - q[0]).abs() + (l[1] - q[1]).abs() <= 1e-15 * scale {
                continue;
            }
        }
        out.push(q);
    }
    while out.len() > 1 {
        let (f, l) = (out[0], out[out.len() - 1]);
        if (l[0] - f[0]).abs() + (l[1] - f[1]).abs() <= 1e-15 * scale {
            out.pop();
        } else {
            break;
        }
    }
    out
}

/// Moves polyline vertices lying within `1e−12 h` of a background node or edge by
/// `1e−10 h` in a fixed direction that is not aligned with any grid direction.
/// Shifting in a common direction keeps chains of degenerate vertices parallel
/// to their original segments while lifting them off background edges.
fn perturb_vertices(mesh: &Mesh, loc: &ElementLocator, pts: &mut [[f64; 2]], h: f64) {
    const DIR: [f64; 2] = [0.809_016_994_374_947_4, 0.587_785_252_292_473_1];
    let tol = 1e-12 * h;
    for v in pts.iter_mut() {
        let p = *v;
        let near = loc.candidates([p[0] - tol, p[1] - tol], [p[0] + tol, p[1] + tol]);
        let degenerate = near.iter().any(|&e| {
            let c = mesh.coords(e);
            (0..4).any(|k| point_segment_distance(p, c[k], c[(k + 1) % 4]) <= tol)
        });
        if degenerate {
            *v = [p[0] + 1e-10 * h * DIR[0], p[1] + 1e-10 * h * DIR[1]];
        }
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
    crate::mesh::dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Closed region boundary used for classification: closure chains are pushed
/// outwards by `reach` so that walls coinciding with background edges never
/// produce degenerate cuts.
fn region_polygon(poly: &InterfacePolyline, reach: f64) -> (Vec<[f64; 2]>, Vec<Option<usize>>) {
    let segs = &poly.segments;
    let n = segs.len();
    // rotate so that we start at the beginning of a non-closure run
    let start = (0..n)
        .find(|&i| segs[i].kind == SegmentKind::Interface && segs[(i + n - 1) % n].kind == SegmentKind::Closure)
        .unwrap_or(0);
    let mut pts = Vec::with_capacity(n + 4);
    let mut seg_of = Vec::with_capacity(n + 4);
    let all_closure = segs.iter().all(|q| q.kind == SegmentKind::Closure);
    let mut i = 0;
    while i < n {
        let s = &segs[(start + i) % n];
        if s.kind == SegmentKind::Interface || all_closure {
            pts.push(s.a);
            seg_of.push(Some((start + i) % n));
            i += 1;
            continue;
        }
        let first = s.clone();
        let mut j = i;
        while j < n && segs[(start + j) % n].kind == SegmentKind::Closure {
            j += 1;
        }
        let last = segs[(start + j - 1) % n].clone();
        let (na, nb) = (first.normal, last.normal);
        pts.push(first.a);
        seg_of.push(None);
        pts.push([first.a[0] + reach * na[0], first.a[1] + reach * na[1]]);
        seg_of.push(None);
        pts.push([last.b[0] + reach * nb[0], last.b[1] + reach * nb[1]]);
        seg_of.push(None);
        i = j;
    }
    (pts, seg_of)
}

/// Characteristic background element size (mean edge length).
pub fn mesh_size(mesh: &Mesh) -> f64 {
    let mut s = 0.0;
    for e in 0..mesh.elements.len() {
        let c = mesh.coords(e);
        for k in 0..4 {
            s += crate::mesh::dist(c[k], c[(k + 1) % 4]);
        }
    }
    s / (4.0 * mesh.elements.len() as f64)
}

struct ElementCut {
    class: ElementClass,
    polys: Vec<Vec<[f64; 2]>>,
    area: f64,
    quad: Vec<QuadPoint>,
}

/// Classifies all background elements and builds the quadratures.
///
/// `poro_mesh` must be given when an FPI polyline is present; it maps interface
/// points back to parent poro elements.
pub fn classify_and_cut(
    mesh: &Mesh,
    locator: &ElementLocator,
    polylines: &[InterfacePolyline],
    poro_mesh: Option<&Mesh>,
) -> Result<CutTopology> {
    let h = mesh_size(mesh);
    let ne = mesh.elements.len();
    let lines: Vec<(usize, &Segment)> = polylines
        .iter()
        .enumerate()
        .filter(|(_, p)| p.tag == PolylineTag::CutNeumann)
        .map(|(i, p)| (i, &p.segments[0]))
        .collect();
    let fpi: Vec<&InterfacePolyline> =
        polylines.iter().filter(|p| p.tag == PolylineTag::FluidPoroInterface).collect();
    if fpi.len() > 1 {
        return Err(Error::InvalidArgument("at most one fluid-poro interface is supported".into()));
    }
    let (lo, hi) = bbox(&mesh.nodes);
    let reach = 2.0 * ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let region = fpi.first().map(|p| {
        let (mut pts, seg_of) = region_polygon(p, reach);
        perturb_vertices(mesh, locator, &mut pts, h);
        (pts, seg_of)
    });
    // candidate P segments per element
    let mut near: Vec<Vec<usize>> = vec![Vec::new(); ne];
    if let Some((pts, _)) = &region {
        let np = pts.len();
        for k in 0..np {
            let (a, b) = (pts[k], pts[(k + 1) % np]);
            for e in locator.candidates(a, b) {
                let (ea, eb) = bbox(&mesh.coords(e));
                let (sa, sb) = bbox(&[a, b]);
                if sa[0] <= eb[0] && ea[0] <= sb[0] && sa[1] <= eb[1] && ea[1] <= sb[1] {
                    near[e].push(k);
                }
            }
        }
    }
    let cuts: Vec<Result<ElementCut>> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let quad = mesh.coords(e);
            let full_area = polygon_area(&quad);
            let mut poly: Vec<[f64; 2]> = quad.to_vec();
            let mut clipped = false;
            for (_, s) in &lines {
                let m = s.normal;
                let sd = |q: [f64; 2]| (q[0] - s.a[0]) * m[0] + (q[1] - s.a[1]) * m[1];
                if poly.iter().all(|&q| sd(q) >= 0.0) {
                    continue;
                }
                clipped = true;
                poly = clip_half_plane(&poly, s.a, m);
                if poly.len() < 3 || polygon_area(&poly) <= 0.0 {
                    return Ok(ElementCut { class: ElementClass::Void, polys: vec![], area: 0.0, quad: vec![] });
                }
            }
            let mut polys = vec![poly.clone()];
            if let Some((pts, _)) = &region {
                if near[e].is_empty() {
                    if winding_number(pts, centroid(&quad)) != 0 {
                        return Ok(ElementCut { class: ElementClass::Void, polys: vec![], area: 0.0, quad: vec![] });
                    }
                } else {
                    match subtract_region(&poly, pts, &near[e])? {
                        None => {}
                        Some(p) => {
                            clipped = true;
                            polys = p;
                        }
                    }
                }
            }
            let area: f64 = polys.iter().map(|p| polygon_area(p)).sum();
            if polys.is_empty() || area <= 0.0 {
                return Ok(ElementCut { class: ElementClass::Void, polys: vec![], area: 0.0, quad: vec![] });
            }
            if !clipped {
                let qp = gauss_2x2()
                    .iter()
                    .map(|&(xi, w)| {
                        let s = mesh.reference_map(e, xi);
                        QuadPoint { xi, x: s.x, w: w * s.det }
                    })
                    .collect();
                return Ok(ElementCut { class: ElementClass::Fluid, polys: vec![], area: full_area, quad: qp });
            }
            let mut qp = Vec::new();
            for p in &polys {
                for t in triangulate(p) {
                    for (x, w) in triangle_quadrature(t) {
                        let (xi, _) = mesh.inverse_map(e, x)?;
                        qp.push(QuadPoint { xi, x, w });
                    }
                }
            }
            Ok(ElementCut { class: ElementClass::Cut, polys, area, quad: qp })
        })
        .collect();
    let mut classification = Vec::with_capacity(ne);
    let mut physical_quadrature = Vec::with_capacity(ne);
    let mut physical_area = Vec::with_capacity(ne);
    let mut polygons = Vec::with_capacity(ne);
    for c in cuts {
        let c = c?;
        classification.push(c.class);
        physical_quadrature.push(c.quad);
        physical_area.push(c.area);
        polygons.push(if c.class == ElementClass::Cut { c.polys } else { vec![] });
    }

    // interface quadrature on FPI segments
    let g3 = gauss_1d(3);
    let mut interface_quadrature = Vec::new();
    let mut h_gamma = vec![0.0; ne];
    if let (Some(p), Some((pts, seg_of))) = (fpi.first(), &region) {
        let poro = poro_mesh.ok_or_else(|| Error::InvalidArgument("poro mesh required for interface".into()))?;
        let np = pts.len();
        let mut pieces: Vec<(usize, usize, f64, f64, [f64; 2], [f64; 2])> = Vec::new();
        for k in 0..np {
            let Some(si) = seg_of[k] else { continue };
            let seg = &p.segments[si];
            if seg.kind != SegmentKind::Interface {
                continue;
            }
            let (a, b) = (pts[k], pts[(k + 1) % np]);
            let mut ivals: Vec<(usize, f64, f64)> = Vec::new();
            for e in locator.candidates(a, b) {
                if classification[e] != ElementClass::Cut {
                    continue;
                }
                if let Some((t0, t1)) = clip_segment_convex(&mesh.coords(e), a, b) {
                    if t1 - t0 > 1e-14 {
                        ivals.push((e, t0, t1));
                    }
                }
            }
            ivals.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
            let mut reach_t = 0.0f64;
            for (e, t0, t1) in ivals {
                let t0 = t0.max(reach_t);
                if t1 - t0 <= 1e-14 {
                    continue;
                }
                reach_t = t1;
                pieces.push((e, si, t0, t1, a, b));
            }
        }
        let mut len_in = vec![0.0; ne];
        for &(e, _, t0, t1, a, b) in &pieces {
            len_in[e] += (t1 - t0) * crate::mesh::dist(a, b);
        }
        for e in 0..ne {
            if let Some(hg) = interface_h_gamma(mesh.area(e), len_in[e]) {
                h_gamma[e] = hg;
            }
        }
        for (e, si, t0, t1, a, b) in pieces {
            let seg = &p.segments[si];
            let edge = seg.edge.expect("FPI segments reference poro edges");
            let be = &poro.boundary_edges[edge];
            let len = crate::mesh::dist(a, b);
            for &(g, w) in &g3 {
                let t = t0 + 0.5 * (g + 1.0) * (t1 - t0);
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let (fluid_xi, _) = mesh.inverse_map(e, x)?;
                interface_quadrature.push(InterfacePoint {
                    element: e,
                    fluid_xi,
                    x,
                    w: 0.5 * w * (t1 - t0) * len,
                    normal: [-seg.normal[0], -seg.normal[1]],
                    edge,
                    poro_element: be.element,
                    poro_xi: edge_local(be.local_edge, t),
                    h_gamma: h_gamma[e],
                });
            }
        }
        interface_quadrature.sort_by(|x, y| x.element.cmp(&y.element));
    }

    let mut neumann_quadrature = Vec::new();
    for (li, s) in &lines {
        let (a, b) = (s.a, s.b);
        let len = crate::mesh::dist(a, b);
        for e in locator.candidates(a, b) {
            if classification[e] == ElementClass::Void {
                continue;
            }
            let Some((t0, t1)) = clip_segment_convex(&mesh.coords(e), a, b) else { continue };
            if t1 - t0 <= 1e-14 {
                continue;
            }
            for &(g, w) in &g3 {
                let t = t0 + 0.5 * (g + 1.0) * (t1 - t0);
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let (fluid_xi, _) = mesh.inverse_map(e, x)?;
                neumann_quadrature.push(NeumannPoint {
                    element: e,
                    fluid_xi,
                    x,
                    w: 0.5 * w * (t1 - t0) * len,
                    normal: [-s.normal[0], -s.normal[1]],
                    line: *li,
                });
            }
        }
    }
    neumann_quadrature.sort_by(|x, y| x.element.cmp(&y.element));

    let mut active_nodes = vec![false; mesh.nodes.len()];
    for e in 0..ne {
        if classification[e] != ElementClass::Void {
            for &n in &mesh.elements[e] {
                active_nodes[n] = true;
            }
        }
    }
    let mut cip = Vec::new();
    let mut ghost = Vec::new();
    for (f, face) in mesh.interior_faces.iter().enumerate() {
        let [a, b] = face.elements;
        let (ca, cb) = (classification[a], classification[b]);
        if ca == ElementClass::Void || cb == ElementClass::Void {
            continue;
        }
        cip.push(f);
        if ca == ElementClass::Cut || cb == ElementClass::Cut {
            ghost.push(f);
        }
    }
    Ok(CutTopology {
        classification,
        physical_quadrature,
        physical_area,
        polygons,
        interface_quadrature,
        neumann_quadrature,
        h_gamma,
        ghost_faces: mesh.face_set(ghost),
        cip_faces: mesh.face_set(cip),
        active_nodes,
    })
}

/// CSV dump of the interface quadrature: `element_id, x, y, w, nx, ny`.
pub fn interface_quadrature_csv(topo: &CutTopology) -> String {
    let mut s = String::from("element_id,x,y,w,nx,ny\n");
    for q in &topo.interface_quadrature {
        s.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            q.element, q.x[0], q.x[1], q.w, q.normal[0], q.normal[1]
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    fn square_poly(c: [f64; 2], half: f64, rot: f64) -> Vec<[f64; 2]> {
        let (s, co) = rot.sin_cos();
        [[-half, -half], [half, -half], [half, half], [-half, half]]
            .iter()
            .map(|p| [c[0] + co * p[0] - s * p[1], c[1] + s * p[0] + co * p[1]])
            .collect()
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        let t = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]];
        // Green's theorem moment oracle on the triangle
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q: f64 = triangle_quadrature(t).iter().map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32)).sum();
                let exact = green_moment(&t, a, b);
                assert!((q - exact).abs() <= 1e-13 * exact.abs().max(1e-3), "{a} {b}: {q} vs {exact}");
            }
        }
    }

    // ∫ x^a y^b = ∮ x^{a+1} y^b/(a+1) dy, integrated exactly per edge with Gauss–Legendre
    fn green_moment(p: &[[f64; 2]], a: u32, b: u32) -> f64 {
        let n = p.len();
        let g = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189),
            (-0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.0, 0.568_888_888_888_889),
            (0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.906_179_845_938_664, 0.236_926_885_056_189),
        ];
        let mut s = 0.0;
        for i in 0..n {
            let (u, v) = (p[i], p[(i + 1) % n]);
            for (x, w) in g {
                let t = 0.5 * (x + 1.0);
                let px = u[0] + t * (v[0] - u[0]);
                let py = u[1] + t * (v[1] - u[1]);
                s += 0.5 * w * px.powi(a as i32 + 1) * py.powi(b as i32) / (a as f64 + 1.0) * (v[1] - u[1]);
            }
        }
        s
    }

    #[test]
    fn vertical_cut_through_unit_element() {
        let m = build_structured_mesh([0.0, 0.0], [1.0, 1.0], 1, 1, 0.0).unwrap();
        let loc = ElementLocator::new(&m);
        let line = InterfacePolyline::cut_line([0.5, 0.0], [1.0, 0.0], 10.0);
        let topo = classify_and_cut(&m, &loc, &[line], None).unwrap();
        assert_eq!(topo.classification[0], ElementClass::Cut);
        assert!((topo.physical_area[0] - 0.5).abs() < 1e-15);
        let len: f64 = topo.neumann_quadrature.iter().map(|q| q.w).sum();
        assert!((len - 1.0).abs() < 1e-14);
        assert!(topo.neumann_quadrature.iter().all(|q| q.normal == [-1.0, 0.0]));
    }

    #[test]
    fn polyline_outside_mesh_leaves_all_fluid() {
        let m = build_structured_mesh([0.0, 0.0], [1.0, 1.0], 4, 4, 0.0).unwrap();
        let loc = ElementLocator::new(&m);
        let poro = build_structured_mesh([5.0, 5.0], [1.0, 1.0], 2, 2, 0.0).unwrap();
        let pl = extract_interface(&poro, &vec![[0.0; 2]; poro.nodes.len()], &[]).unwrap();
        let topo = classify_and_cut(&m, &loc, &[pl], Some(&poro)).unwrap();
        assert!(topo.classification.iter().all(|c| *c == ElementClass::Fluid));
        assert!(topo.ghost_faces.faces.is_empty());
        assert!(topo.interface_quadrature.is_empty());
    }

    #[test]
    fn extract_square_boundary() {
        let poro = build_structured_mesh([-0.25, -0.25], [0.5, 0.5], 4, 4, 0.0).unwrap();
        let u = vec![[0.0; 2]; poro.nodes.len()];
        let pl = extract_interface(&poro, &u, &[]).unwrap();
        assert_eq!(pl.segments.len(), 16);
        assert!((pl.length() - 2.0).abs() < 1e-14);
        for s in &pl.segments {
            let mid = [0.5 * (s.a[0] + s.b[0]), 0.5 * (s.a[1] + s.b[1])];
            let expect = if (mid[0] - 0.25).abs() < 1e-12 {
                [1.0, 0.0]
            } else if (mid[0] + 0.25).abs() < 1e-12 {
                [-1.0, 0.0]
            } else if (mid[1] - 0.25).abs() < 1e-12 {
                [0.0, 1.0]
            } else {
                [0.0, -1.0]
            };
            assert!((s.normal[0] - expect[0]).abs() < 1e-14 && (s.normal[1] - expect[1]).abs() < 1e-14);
        }
        let shifted = extract_interface(&poro, &vec![[0.3, -0.1]; poro.nodes.len()], &[]).unwrap();
        for (s, t) in pl.segments.iter().zip(&shifted.segments) {
            assert!((t.a[0] - s.a[0] - 0.3).abs() < 1e-15 && (t.a[1] - s.a[1] + 0.1).abs() < 1e-15);
            assert_eq!(s.normal, t.normal);
        }
    }

    #[test]
    fn self_intersection_detected() {
        let poro = build_structured_mesh([0.0, 0.0], [1.0, 1.0], 2, 1, 0.0).unwrap();
        let mut u = vec![[0.0; 2]; poro.nodes.len()];
        // drag the top middle node far below the bottom edge
        u[4] = [0.0, -2.0];
        assert!(matches!(extract_interface(&poro, &u, &[]), Err(Error::InvalidInterface(_))));
    }

    #[test]
    fn corner_chord_h_gamma() {
        let h = 0.2;
        // chord of length h/10 cutting a corner: h_Γ = h²/(h/10) = 10 h
        assert!((interface_h_gamma(h * h, h / 10.0).unwrap() - 10.0 * h).abs() < 1e-15);
        assert!(interface_h_gamma(h * h, 0.0).is_none());
    }

    #[test]
    fn square_hole_area_and_interface_length() {
        let m = build_structured_mesh([-0.5, -0.5], [1.0, 1.0], 8, 8, 0.0).unwrap();
        let loc = ElementLocator::new(&m);
        for (rot, n) in [(0.3f64, 4usize), (0.0, 4), (std::f64::consts::FRAC_PI_4, 3)] {
            let poro = build_structured_mesh([-0.2, -0.2], [0.4, 0.4], n, n, rot).unwrap();
            let pl = extract_interface(&poro, &vec![[0.0; 2]; poro.nodes.len()], &[]).unwrap();
            let topo = classify_and_cut(&m, &loc, &[pl], Some(&poro)).unwrap();
            let area = topo.fluid_area();
            assert!((area - (1.0 - 0.16)).abs() < 1e-12, "rot {rot}: {area}");
            let len: f64 = topo.interface_quadrature.iter().map(|q| q.w).sum();
            assert!((len - 1.6).abs() < 1e-12, "rot {rot}: {len}");
            for f in &topo.ghost_faces.faces {
                let [a, b] = m.interior_faces[*f].elements;
                assert!(topo.classification[a] == ElementClass::Cut || topo.classification[b] == ElementClass::Cut);
            }
            for (e, c) in topo.classification.iter().enumerate() {
                if *c == ElementClass::Cut && topo.interface_quadrature.iter().any(|q| q.element == e) {
                    assert!(topo.h_gamma[e] > 0.0);
                }
            }
        }
    }

    #[test]
    fn clipped_polygon_moments() {
        let m = build_structured_mesh([-0.5, -0.5], [1.0, 1.0], 6, 6, 0.2).unwrap();
        let loc = ElementLocator::new(&m);
        let poro = build_structured_mesh([-0.17, -0.23], [0.41, 0.37], 3, 3, 0.7).unwrap();
        let pl = extract_interface(&poro, &vec![[0.0; 2]; poro.nodes.len()], &[]).unwrap();
        let line = InterfacePolyline::cut_line([-0.3, 0.0], [1.0, 0.2], 5.0);
        let topo = classify_and_cut(&m, &loc, &[pl, line], Some(&poro)).unwrap();
        let mut checked = 0;
        for e in 0..m.elements.len() {
            if topo.classification[e] != ElementClass::Cut {
                continue;
            }
            for a in 0..=3u32 {
                for b in 0..=(3 - a) {
                    let q: f64 = topo.physical_quadrature[e]
                        .iter()
                        .map(|p| p.w * p.x[0].powi(a as i32) * p.x[1].powi(b as i32))
                        .sum();
                    let exact: f64 = topo.polygons[e].iter().map(|p| green_moment(p, a, b)).sum();
                    let scale = green_moment(&m.coords(e), 0, 0);
                    assert!((q - exact).abs() <= 1e-12 * scale.max(exact.abs()), "{e} {a} {b}");
                }
            }
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn cut_through_background_nodes_is_consistent() {
        // poro square whose edges run exactly along background grid lines
        let m = build_structured_mesh([0.0, 0.0], [1.0, 1.0], 8, 8, 0.0).unwrap();
        let loc = ElementLocator::new(&m);
        let poro = build_structured_mesh([0.25, 0.25], [0.5, 0.5], 2, 2, 0.0).unwrap();
        let pl = extract_interface(&poro, &vec![[0.0; 2]; poro.nodes.len()], &[]).unwrap();
        let topo = classify_and_cut(&m, &loc, &[pl], Some(&poro)).unwrap();
        assert!((topo.fluid_area() - 0.75).abs() < 1e-9);
        let len: f64 = topo.interface_quadrature.iter().map(|q| q.w).sum();
        assert!((len - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tracing_nonconvex_region() {
        // L-shaped poro region crossing a single large element
        let e = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let p = vec![[0.3, -1.0], [2.0, -1.0], [2.0, 0.4], [0.6, 0.4], [0.6, 2.0], [0.3, 2.0]];
        let near: Vec<usize> = (0..p.len()).collect();
        let polys = subtract_region(&e, &p, &near).unwrap().unwrap();
        let area: f64 = polys.iter().map(|q| polygon_area(q)).sum();
        // E minus (strip x∈[0.3,0.6]) minus (x>0.6, y<0.4)
        let expect = 1.0 - 0.3 - 0.4 * 0.4;
        assert!((area - expect).abs() < 1e-14, "{area}");
        assert_eq!(polys.len(), 2);
    }

    #[test]
    fn square_rotation_sweep_conserves_area() {
        let m = build_structured_mesh([-0.5, -0.5], [1.0, 1.0], 10, 10, 0.0).unwrap();
        let loc = ElementLocator::new(&m);
        for k in 0..25 {
            let rot = k as f64 * 0.0631;
            let c = [0.013 * k as f64 - 0.1, 0.05 - 0.007 * k as f64];
            let pts = square_poly(c, 0.21, rot);
            let poro = crate::mesh::Mesh::new(pts, vec![[0, 1, 2, 3]], Default::default()).unwrap();
            let pl = extract_interface(&poro, &vec![[0.0; 2]; 4], &[]).unwrap();
            let topo = classify_and_cut(&m, &loc, &[pl], Some(&poro)).unwrap();
            assert!((topo.fluid_area() - (1.0 - 0.42 * 0.42)).abs() < 1e-12, "k {k}");
        }
    }
}
