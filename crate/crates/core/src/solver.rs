//! Sparse direct solve, extension of the fluid field to newly active nodes
//! and the Newton loop of one time step.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::assembly::{assemble, nodal_bodies, relabel, DofMap, FluidNode, Model, ProblemData, State, StepContext};
use crate::cutgeom::CutTopology;
use crate::error::{Error, Result};
use crate::mesh::{dist, inverse_map_quad, shape_values, Mesh};
use crate::poro_form::gauss_porosity;

/// Solves `K x = b` with a sparse LU factorization. Duplicate triplets are summed.
pub fn linear_solve(n: usize, triplets: &[Triplet<usize, usize, f64>], b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != n {
        return Err(Error::InvalidArgument(format!("right-hand side has length {}, expected {n}", b.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut row_nz = vec![false; n];
    let mut col_nz = vec![false; n];
    for t in triplets {
        if t.row >= n || t.col >= n {
            return Err(Error::InvalidArgument(format!("entry ({}, {}) outside a {n}x{n} matrix", t.row, t.col)));
        }
        if t.val != 0.0 {
            row_nz[t.row] = true;
            col_nz[t.col] = true;
        }
    }
    if let Some(i) = (0..n).find(|&i| !row_nz[i] || !col_nz[i]) {
        return Err(Error::SingularSystem(i));
    }
    // rows are scaled to unit max entry; drag rows can exceed the others by many decades
    let mut scale = vec![0.0f64; n];
    for t in triplets {
        scale[t.row] = scale[t.row].max(t.val.abs());
    }
    let scaled: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|t| Triplet::new(t.row, t.col, t.val / scale[t.row])).collect();
    let bs: Vec<f64> = (0..n).map(|i| b[i] / scale[i]).collect();
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &scaled)
        .map_err(|e| Error::InvalidArgument(format!("sparse matrix: {e:?}")))?;
    let lu = k.sp_lu().map_err(|_| Error::SingularSystem(0))?;
    let residual = |x: &[f64]| {
        let mut r = bs.clone();
        for t in &scaled {
            r[t.row] -= t.val * x[t.col];
        }
        r
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    let mut r = bs.clone();
    let mut rn = norm(&r);
    for _ in 0..4 {
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place(rhs.as_mut());
        let trial: Vec<f64> = (0..n).map(|i| x[i] + rhs[(i, 0)]).collect();
        if let Some(i) = trial.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(i));
        }
        let rt = residual(&trial);
        let rtn = norm(&rt);
        if rtn >= rn {
            break;
        }
        let done = rtn <= 1e-14 * norm(&bs);
        x = trial;
        r = rt;
        rn = rtn;
        if done {
            break;
        }
    }
    // a tiny pivot shows up as a large residual
    let bn = norm(&bs);
    if rn > 1e-6 * bn.max(1e-300) && rn > 1e-12 {
        let worst = (0..n).max_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs())).unwrap_or(0);
        return Err(Error::SingularSystem(worst));
    }
    Ok(x)
}

/// Gives values to nodes with `need` set and `valid` unset, from the bilinear
/// field of the closest fully valid element within two element rings, else
/// from the closest valid node in that patch. Returns the number of nodes
/// filled.
pub fn extend_fluid(
    mesh: &Mesh,
    node_elements: &[Vec<usize>],
    values: &mut [FluidNode],
    valid: &mut [bool],
    need: &[bool],
) -> Result<usize> {
    let snapshot = valid.to_vec();
    let source = values.to_vec();
    let mut filled = 0;
    for n in 0..mesh.nodes.len() {
        if !need[n] || snapshot[n] {
            continue;
        }
        let x = mesh.nodes[n];
        let mut patch: Vec<usize> = node_elements[n].clone();
        for _ in 0..2 {
            let mut next = patch.clone();
            for &e in &patch {
                for &m in &mesh.elements[e] {
                    next.extend(node_elements[m].iter().copied());
                }
            }
            next.sort_unstable();
            next.dedup();
            patch = next;
        }
        let mut best: Option<(f64, usize)> = None;
        for &e in &patch {
            if mesh.elements[e].iter().all(|&m| snapshot[m]) {
                let c = mesh.coords(e);
                let centre = [c.iter().map(|p| p[0]).sum::<f64>() / 4.0, c.iter().map(|p| p[1]).sum::<f64>() / 4.0];
                let d = dist(centre, x);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, e));
                }
            }
        }
        let value = match best.and_then(|(_, e)| inverse_map_quad(&mesh.coords(e), x).ok().map(|(xi, _)| (e, xi))) {
            Some((e, xi)) => {
                let nv = shape_values(xi);
                let mut out = FluidNode::default();
                for (a, &m) in mesh.elements[e].iter().enumerate() {
                    let s = &source[m];
                    for i in 0..2 {
                        out.v[i] += nv[a] * s.v[i];
                        out.a[i] += nv[a] * s.a[i];
                    }
                    out.p += nv[a] * s.p;
                }
                out
            }
            None => {
                let nearest = patch
                    .iter()
                    .flat_map(|&e| mesh.elements[e])
                    .filter(|&m| snapshot[m])
                    .min_by(|&a, &b| dist(mesh.nodes[a], x).total_cmp(&dist(mesh.nodes[b], x)));
                match nearest {
                    Some(m) => source[m],
                    None => return Err(Error::ReconstructionRequired(n)),
                }
            }
        };
        values[n] = value;
        valid[n] = true;
        filled += 1;
    }
    Ok(filled)
}

/// Outcome of one converged time step.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    /// Nodes that needed an extended history value.
    pub extended_nodes: usize,
}

/// Checks that the poro mesh is not inverted and that porosity stays admissible,
/// then cuts the background mesh at the displaced interface.
pub fn admissible_topology(model: &Model, s: &State) -> Result<CutTopology> {
    if let Some(pd) = &model.poro {
        for (e, el) in pd.mesh.elements.iter().enumerate() {
            let u = el.map(|a| s.poro[a].u);
            let p = el.map(|a| s.poro[a].p);
            gauss_porosity(&pd.mesh.coords(e), &u, &p, &pd.params).map_err(|err| relabel(err, e))?;
        }
    }
    model.cut(&s.displacements())
}

/// Advances `old` by one time step. Returns the new state and its topology.
pub fn advance(model: &Model, data: &dyn ProblemData, old: &State) -> Result<(State, CutTopology, StepReport)> {
    let ts = model.time;
    let t = old.t + ts.dt;
    let bodies = nodal_bodies(model, data, t);
    let mut hist = old.clone();
    let mut it = old.clone();
    it.t = t;
    let mut topo = admissible_topology(model, &it)?;
    let n_poro = model.poro.as_ref().map_or(0, |p| p.mesh.nodes.len());
    let cfg = model.newton;
    let mut residuals = Vec::new();
    let mut extended = 0;
    let mut r0 = 0.0;
    for k in 0..=cfg.max_iterations {
        extended += extend_fluid(&model.fluid_mesh, &model.node_elements, &mut hist.fluid, &mut hist.fluid_valid, &topo.active_nodes)?;
        extend_fluid(&model.fluid_mesh, &model.node_elements, &mut it.fluid, &mut it.fluid_valid, &topo.active_nodes)?;
        let dofs = DofMap::new(&topo, n_poro);
        let ctx = StepContext {
            topo: &topo,
            dofs: &dofs,
            history: &hist,
            t,
            fluid_body: &bodies[0],
            poro_fluid_body: &bodies[1],
            poro_solid_body: &bodies[2],
        };
        let asm = assemble(model, data, &ctx, &it, Some(cfg.jacobian))?;
        let norm = asm.residual_norm();
        residuals.push(norm);
        if k == 0 {
            r0 = norm;
        }
        if norm <= (cfg.rtol * r0).max(cfg.atol) {
            let new = finish_step(model, &hist, it, &dofs)?;
            return Ok((new, topo, StepReport { iterations: k, residuals, extended_nodes: extended }));
        }
        if k == cfg.max_iterations || !norm.is_finite() {
            break;
        }
        let rhs: Vec<f64> = asm.residual.iter().map(|v| -v).collect();
        let dx = linear_solve(dofs.len(), &asm.triplets, &rhs)?;
        let x = dofs.pack(&it);
        let mut alpha = 1.0;
        loop {
            let mut trial = it.clone();
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
            dofs.unpack(&xt, &mut trial);
            match admissible_topology(model, &trial) {
                Ok(tp) => {
                    it = trial;
                    topo = tp;
                    break;
                }
                Err(e) if alpha < 1.0 / 64.0 => return Err(e),
                Err(_) => alpha *= 0.5,
            }
        }
    }
    Err(Error::NonlinearDivergence { iterations: cfg.max_iterations, history: residuals })
}

/// Stores rates at the new level and keeps only active fluid nodes valid.
fn finish_step(model: &Model, hist: &State, mut s: State, dofs: &DofMap) -> Result<State> {
    let ts = model.time;
    for n in 0..s.fluid.len() {
        s.fluid_valid[n] = dofs.fluid_index[n].is_some();
        if s.fluid_valid[n] {
            let o = &hist.fluid[n];
            for i in 0..2 {
                s.fluid[n].a[i] = ts.rate(s.fluid[n].v[i], o.v[i], o.a[i]);
            }
        }
    }
    for n in 0..s.poro.len() {
        let o = hist.poro[n];
        let c = &mut s.poro[n];
        for i in 0..2 {
            c.v_rate[i] = ts.rate(c.v[i], o.v[i], o.v_rate[i]);
            c.u_rate[i] = ts.rate(c.u[i], o.u[i], o.u_rate[i]);
            c.u_acc[i] = ts.rate(c.u_rate[i], o.u_rate[i], o.u_acc[i]);
        }
    }
    if let Some(pd) = &model.poro {
        for (e, el) in pd.mesh.elements.iter().enumerate() {
            let u = el.map(|a| s.poro[a].u);
            let p = el.map(|a| s.poro[a].p);
            let phi = gauss_porosity(&pd.mesh.coords(e), &u, &p, &pd.params).map_err(|err| relabel(err, e))?;
            for q in 0..4 {
                s.phi_rate[e][q] = ts.rate(phi[q], hist.phi[e][q], hist.phi_rate[e][q]);
            }
            s.phi[e] = phi;
        }
    }
    Ok(s)
}
