//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion, followed by indented details.
//!
//! `ACCEPTANCE_ONLY=1,5,6` restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fpi_core::assembly::{assemble, dense_jacobian, nodal_bodies, DofMap, JacobianMode, State, StepContext};
use fpi_core::config::{InterfaceLaw, PenaltyTarget, RunConfig, StudyKind};
use fpi_core::coupling_form::{interface_residual, slip_coefficient, InterfacePointData, Jumps, Terms, NDOF};
use fpi_core::dual::Dual;
use fpi_core::fluid_form::{face_geometry, fluid_face_residual, FaceGeometry};
use fpi_core::mesh::{build_structured_mesh, map_quad, Mesh};
use fpi_core::mms::{build_rotated_squares, Mms, MmsParams, CUT_OFFSET, NORM_NAMES};
use fpi_core::params::{
    FluidParams, NitscheConfig, Permeability, PorosityMode, PoroParams, StabConstants, TangentialMethod, TimeParams,
};
use fpi_core::poro_form::{
    kinematics, kozeny_carman, poro_face_residual, porosity, second_pk_stress, skeleton_energy, spatial_permeability,
    PoroNodalHistory,
};
use fpi_core::studies::{run_beam, run_mms_study, RunRecord};

struct Verdict {
    pass: bool,
    details: Vec<String>,
}

impl Verdict {
    fn new() -> Verdict {
        Verdict { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("     {msg}"));
    }
}

fn quiet(_: &str) {}

fn norm_of(r: &RunRecord, name: &str) -> f64 {
    r.norm(name).unwrap_or(f64::INFINITY)
}

fn status(r: &RunRecord) -> String {
    match &r.result {
        Ok((_, it)) => format!("ok ({it} Newton iterations)"),
        Err(e) => format!("failed: {e}"),
    }
}

// ---------------------------------------------------------------------------
// 1. convergence orders

fn criterion_1(v: &mut Verdict) {
    let mut cfg = RunConfig::defaults(StudyKind::Convergence);
    cfg.h = vec![0.25, 0.125, 0.0625, 0.03125, 0.015625];
    cfg.dt = 0.05;
    cfg.t_end = 0.1;
    cfg.zetas = vec![-1.0];
    cfg.nitsche.gamma_n = 1.0 / 45.0;
    cfg.nitsche.gamma_t = 1.0 / 45.0;
    cfg.laws = vec![InterfaceLaw::Bj, InterfaceLaw::Bjs];
    cfg.methods = vec![TangentialMethod::Nitsche];
    let records = run_mms_study(&cfg, &mut quiet).expect("study");
    for law in [InterfaceLaw::Bj, InterfaceLaw::Bjs] {
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.run.mms.beta_bj == law.beta()).collect();
        let coarse = rs.iter().find(|r| (r.run.h - 0.03125).abs() < 1e-12).unwrap();
        let fine = rs.iter().find(|r| (r.run.h - 0.015625).abs() < 1e-12).unwrap();
        for r in &rs {
            v.check(r.result.is_ok(), format!("{} h={}: {}", law.name(), r.run.h, status(r)));
        }
        let tangential_min = if law == InterfaceLaw::Bjs { 1.8 } else { 1.35 };
        let gates = [
            ("fluid_velocity", 1.7),
            ("fluid_pressure", 1.3),
            ("fluid_velocity_gradient", 0.85),
            ("poro_velocity", 1.7),
            ("poro_pressure", 1.3),
            ("displacement_gradient", 0.85),
            ("interface_tangential_kinematic", tangential_min),
        ];
        for (name, min) in gates {
            let order = (norm_of(coarse, name) / norm_of(fine, name)).log2();
            v.check(order >= min, format!("{} {name}: order {order:.3} (>= {min})", law.name()));
        }
    }
}

// ---------------------------------------------------------------------------
// 2. penalty sensitivity

fn criterion_2(v: &mut Verdict) {
    let mut cfg = RunConfig::defaults(StudyKind::Penalty);
    cfg.h = vec![0.03125];
    cfg.zetas = vec![-1.0, 1.0];
    cfg.penalty_targets = vec![PenaltyTarget::Normal, PenaltyTarget::Tangential];
    cfg.gamma_inv_values = vec![1.0, 3.0, 10.0, 30.0, 45.0, 100.0, 300.0, 1e3, 1e4];
    let records = run_mms_study(&cfg, &mut quiet).expect("study");
    // the swept parameter runs over the list while the other one stays at 45
    let sweep = |zeta: f64, target: PenaltyTarget| -> Vec<(f64, &RunRecord)> {
        let mut s: Vec<(f64, &RunRecord)> = records
            .iter()
            .filter(|r| r.run.nitsche.zeta == zeta)
            .filter_map(|r| {
                let (gn, gt) = (1.0 / r.run.nitsche.gamma_n, 1.0 / r.run.nitsche.gamma_t);
                let (g, other) = match target {
                    PenaltyTarget::Normal => (gn, gt),
                    PenaltyTarget::Tangential => (gt, gn),
                };
                ((other - 45.0).abs() < 1e-9).then_some((g, r))
            })
            .collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
        s
    };
    // largest ratio between neighbouring points whose smaller parameter is
    // below `below`; a failed run counts as an unbounded error
    let max_jump = |s: &[(f64, &RunRecord)], below: f64| -> (f64, String) {
        let mut worst = (0.0f64, String::new());
        for w in s.windows(2).filter(|w| w[0].0 < below) {
            for name in NORM_NAMES {
                let (a, b) = (norm_of(w[0].1, name), norm_of(w[1].1, name));
                let ratio = if a.is_infinite() || b.is_infinite() { f64::INFINITY } else { (a / b).max(b / a) };
                if ratio > worst.0 {
                    worst = (ratio, format!("{name} between {} and {}", w[0].0, w[1].0));
                }
            }
        }
        worst
    };
    for target in [PenaltyTarget::Normal, PenaltyTarget::Tangential] {
        let s = sweep(-1.0, target);
        let failed: Vec<f64> = s.iter().filter(|(_, r)| r.result.is_err()).map(|(g, _)| *g).collect();
        let (j, at) = max_jump(&s, f64::INFINITY);
        v.check(
            s.len() == 9 && j < 10.0,
            format!("zeta=-1 {} sweep over {} points: largest adjacent ratio {j:.3} ({at}), failed runs {failed:?}", target.name(), s.len()),
        );
    }
    let mut found = Vec::new();
    for target in [PenaltyTarget::Normal, PenaltyTarget::Tangential] {
        let s = sweep(1.0, target);
        for (g, r) in &s {
            if r.result.is_err() {
                v.note(format!("zeta=+1 {} gamma_inv={g}: {}", target.name(), status(r)));
            }
        }
        let (j, at) = max_jump(&s, 10.0);
        v.note(format!("zeta=+1 {} sweep: largest jump involving gamma_inv < 10 is {j:.3} ({at})", target.name()));
        if j >= 10.0 {
            found.push(target.name());
        }
    }
    v.check(!found.is_empty(), format!("zeta=+1 shows a >= 10x jump below gamma_inv = 10 for {found:?}"));
    for zeta in [-1.0, 1.0] {
        let s = sweep(zeta, PenaltyTarget::Normal);
        let e: Vec<f64> = s.iter().map(|(_, r)| norm_of(r, "interface_normal_kinematic")).collect();
        let mono = e.windows(2).all(|w| w[1] <= 1.2 * w[0]) && e.iter().all(|x| x.is_finite());
        let shown: Vec<String> = e.iter().map(|x| format!("{x:.3e}")).collect();
        v.check(mono, format!("zeta={zeta:+} normal kinematic error decreasing within 20%: [{}]", shown.join(", ")));
    }
}

// ---------------------------------------------------------------------------
// 3. porosity and permeability robustness

fn criterion_3(v: &mut Verdict) {
    let mut cfg = RunConfig::defaults(StudyKind::Porosity);
    cfg.h = vec![0.03125];
    cfg.laws = vec![InterfaceLaw::Bj];
    cfg.methods = vec![TangentialMethod::Nitsche, TangentialMethod::Substitution];
    cfg.alphas = vec![1.0];
    cfg.porosities = vec![1e-2, 1e-3, 1e-4, 1e-6];
    cfg.mms.a_p = -1e-5;
    cfg.mms.a_ps = -1e-5;
    let records = run_mms_study(&cfg, &mut quiet).expect("study");
    let rows = |m: TangentialMethod| -> Vec<&RunRecord> { records.iter().filter(|r| r.run.nitsche.tangential == m).collect() };
    let nit = rows(TangentialMethod::Nitsche);
    for r in &nit {
        v.check(r.result.is_ok(), format!("nitsche phi={}: {}", r.run.mms.poro.phi0, status(r)));
    }
    for name in NORM_NAMES {
        let e: Vec<f64> = nit.iter().map(|r| norm_of(r, name)).collect();
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let ratio = hi / lo;
        v.check(ratio <= 5.0, format!("nitsche {name}: max/min over phi = {ratio:.3} (<= 5)"));
    }
    let sub = rows(TangentialMethod::Substitution);
    let at = |phi: f64| sub.iter().find(|r| r.run.mms.poro.phi0 == phi).copied().unwrap();
    let (small, large) = (at(1e-6), at(1e-2));
    v.note(format!("substitution phi=1e-6: {}; phi=1e-2: {}", status(small), status(large)));
    let mut best = (0.0f64, "");
    for name in NORM_NAMES.iter().filter(|n| **n != "interface_tangential_kinematic") {
        let ratio = norm_of(small, name) / norm_of(large, name);
        if ratio > best.0 {
            best = (ratio, name);
        }
    }
    v.check(
        best.0 >= 10.0 && small.result.is_ok(),
        format!("substitution error growth phi=1e-6 vs 1e-2: {:.3} on {}", best.0, best.1),
    );
    let (ts, tl) = (norm_of(small, "interface_tangential_kinematic"), norm_of(large, "interface_tangential_kinematic"));
    v.check(ts < tl, format!("substitution tangential kinematic error decreases: {tl:.3e} -> {ts:.3e}"));
}

// ---------------------------------------------------------------------------
// 4. interface law sweep over alpha

fn criterion_4(v: &mut Verdict) {
    let mut cfg = RunConfig::defaults(StudyKind::Alpha);
    cfg.h = vec![0.03125];
    cfg.laws = vec![InterfaceLaw::Bj, InterfaceLaw::Bjs];
    cfg.methods = vec![TangentialMethod::Nitsche];
    cfg.alphas = (-8..=8).map(|k| 10f64.powi(k)).collect();
    let records = run_mms_study(&cfg, &mut quiet).expect("study");
    let law_rows = |law: InterfaceLaw| -> Vec<&RunRecord> { records.iter().filter(|r| r.run.mms.beta_bj == law.beta()).collect() };
    let bjs = law_rows(InterfaceLaw::Bjs);
    for r in bjs.iter().chain(law_rows(InterfaceLaw::Bj).iter()) {
        if r.result.is_err() {
            v.note(format!("beta={} alpha={}: {}", r.run.mms.beta_bj, r.run.mms.alpha_bj, status(r)));
        }
    }
    for name in NORM_NAMES.iter().filter(|n| **n != "interface_tangential_kinematic") {
        let e: Vec<f64> = bjs.iter().map(|r| norm_of(r, name)).collect();
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        v.check(hi / lo <= 5.0, format!("bjs {name}: max/min over alpha = {:.3} (<= 5)", hi / lo));
    }
    let bj = law_rows(InterfaceLaw::Bj);
    let at = |a: f64| bj.iter().find(|r| (r.run.mms.alpha_bj / a - 1.0).abs() < 1e-12).copied().unwrap();
    let base = at(1e-2);
    let mut best = (0.0f64, String::new());
    for a in [10.0, 100.0, 1e3] {
        for name in NORM_NAMES {
            let ratio = norm_of(at(a), name) / norm_of(base, name);
            if ratio.is_finite() && ratio > best.0 {
                best = (ratio, format!("{name} at alpha={a}"));
            }
        }
    }
    v.check(best.0 >= 3.0, format!("bj increase relative to alpha=1e-2: {:.3} ({})", best.0, best.1));
    let plateau = [1e6, 1e7, 1e8].map(at);
    let mut worst = (0.0f64, "");
    for name in NORM_NAMES {
        let e = plateau.map(|r| norm_of(r, name));
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let change = (hi - lo) / lo;
        if !(change <= worst.0) {
            worst = (change, name);
        }
    }
    v.check(worst.0 <= 0.3, format!("bj plateau from 1e6 to 1e8: largest relative change {:.3e} ({})", worst.0, worst.1));
}

// ---------------------------------------------------------------------------
// 5. unit oracles

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn shoelace(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| p[i][0] * p[(i + 1) % n][1] - p[(i + 1) % n][0] * p[i][1]).sum::<f64>()
}

/// Keeps the part of a convex polygon with `(x - q)·m >= 0`.
fn clip(poly: &[[f64; 2]], q: [f64; 2], m: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |x: [f64; 2]| (x[0] - q[0]) * m[0] + (x[1] - q[1]) * m[1];
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sa, sb) = (side(a), side(b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Intersection of two convex counter-clockwise polygons.
fn intersect(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = a.to_vec();
    for i in 0..b.len() {
        let (p, q) = (b[i], b[(i + 1) % b.len()]);
        out = clip(&out, p, [-(q[1] - p[1]), q[0] - p[0]]);
        if out.is_empty() {
            break;
        }
    }
    out
}

fn rotated_square(half: f64, angle: f64) -> Vec<[f64; 2]> {
    let (s, c) = angle.sin_cos();
    [[-half, -half], [half, -half], [half, half], [-half, half]]
        .iter()
        .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
        .collect()
}

// ∫ x^a y^b over a polygon as ∮ x^{a+1} y^b / (a+1) dy, 5-point Gauss per edge
fn green_moment(p: &[[f64; 2]], a: i32, b: i32) -> f64 {
    let g = [
        (-0.906_179_845_938_663_99, 0.236_926_885_056_189_09),
        (-0.538_469_310_105_683_09, 0.478_628_670_499_366_47),
        (0.0, 0.568_888_888_888_888_89),
        (0.538_469_310_105_683_09, 0.478_628_670_499_366_47),
        (0.906_179_845_938_663_99, 0.236_926_885_056_189_09),
    ];
    let mut s = 0.0;
    for i in 0..p.len() {
        let (u, w) = (p[i], p[(i + 1) % p.len()]);
        for (x, wt) in g {
            let t = 0.5 * (x + 1.0);
            let px = u[0] + t * (w[0] - u[0]);
            let py = u[1] + t * (w[1] - u[1]);
            s += 0.5 * wt * px.powi(a + 1) * py.powi(b) / (a as f64 + 1.0) * (w[1] - u[1]);
        }
    }
    s
}

fn base_poro() -> PoroParams {
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

fn criterion_5(v: &mut Verdict) {
    let k = [[0.1, 0.0], [0.0, 0.1]];
    let kappa = slip_coefficient(k, 1.0, 1.0).unwrap();
    v.check(rel(kappa, 0.1f64.sqrt()) <= 1e-10, format!("slip coefficient {kappa:.16} vs sqrt(0.1)"));

    let mut prm = base_poro();
    prm.porosity_mode = PorosityMode::Constitutive;
    let phi = porosity(1.0, 100.0, &prm).unwrap();
    v.check(rel(phi, 2.0 / 3.0) <= 1e-10, format!("porosity at J=1, p=100: {phi:.16}"));

    let k_ref = kozeny_carman(0.5, 1.0, 0.1, 0.5).unwrap();
    let k_quarter = kozeny_carman(0.25, 1.0, 0.1, 0.5).unwrap();
    v.check(rel(k_ref, 0.1) <= 1e-10, format!("Kozeny-Carman at the reference porosity: {k_ref:.16}"));
    v.check(rel(k_quarter, 0.01) <= 1e-10, format!("Kozeny-Carman at J phi = 0.25: {k_quarter:.16}"));
    let k_scaled = kozeny_carman(0.25, 2.0, 0.1, 0.5).unwrap();
    v.check(rel(k_scaled, 0.1) <= 1e-10, format!("Kozeny-Carman at J=2, phi=0.25: {k_scaled:.16}"));

    // cut area against an exact convex polygon boolean
    let beta = PI / 4.0;
    let fluid = rotated_square(0.5, beta);
    let e1 = [beta.cos(), beta.sin()];
    let fluid_cut = clip(&fluid, [CUT_OFFSET * e1[0], CUT_OFFSET * e1[1]], e1);
    let motions: [(f64, [f64; 2]); 3] = [(0.0, [0.0, 0.0]), (0.2, [0.03, -0.02]), (-0.37, [-0.05, 0.04])];
    let mut worst_area: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    let mut cut_elements = 0;
    for h in [0.125, 0.0625, 0.03125] {
        let model = build_rotated_squares(h, &MmsParams::default(), NitscheConfig::default(), TimeParams { theta: 1.0, dt: 0.05 }, true).unwrap();
        let pm = &model.poro.as_ref().unwrap().mesh;
        for (rot, shift) in motions {
            let (s, c) = rot.sin_cos();
            let u: Vec<[f64; 2]> = pm
                .nodes
                .iter()
                .map(|x| [c * x[0] - s * x[1] + shift[0] - x[0], s * x[0] + c * x[1] + shift[1] - x[1]])
                .collect();
            let topo = model.cut(&u).unwrap();
            let poro: Vec<[f64; 2]> = rotated_square(0.25, PI / 6.0)
                .iter()
                .map(|x| [c * x[0] - s * x[1] + shift[0], s * x[0] + c * x[1] + shift[1]])
                .collect();
            let exact = shoelace(&fluid_cut) - shoelace(&intersect(&poro, &fluid_cut));
            worst_area = worst_area.max(rel(topo.fluid_area(), exact));
            for (e, polys) in topo.polygons.iter().enumerate() {
                if polys.is_empty() {
                    continue;
                }
                cut_elements += 1;
                let r = polys.iter().flatten().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
                for a in 0..=3 {
                    for b in 0..=(3 - a) {
                        let q: f64 = topo.physical_quadrature[e].iter().map(|p| p.w * p.x[0].powi(a) * p.x[1].powi(b)).sum();
                        let exact: f64 = polys.iter().map(|p| green_moment(p, a, b)).sum();
                        let scale = exact.abs().max(model.fluid_mesh.area(e) * r.powi(a + b));
                        worst_moment = worst_moment.max((q - exact).abs() / scale);
                    }
                }
            }
        }
    }
    v.check(worst_area <= 1e-10, format!("cut fluid area vs polygon boolean: worst relative error {worst_area:.2e}"));
    v.check(
        worst_moment <= 1e-12 && cut_elements > 0,
        format!("moments up to degree 3 on {cut_elements} cut elements: worst relative error {worst_moment:.2e}"),
    );

    // second Piola-Kirchhoff stress against differences of the strain energy
    let prm = base_poro();
    let mut worst: f64 = 0.0;
    let grads = [[[0.1, 0.05], [0.02, -0.03]], [[-0.2, 0.1], [0.15, 0.25]], [[0.3, -0.1], [0.0, 0.1]], [[0.0, 0.4], [-0.3, 0.0]]];
    for g in grads {
        let kin = kinematics(g, 0).unwrap();
        let s = second_pk_stress(&kin, 0.0, &prm);
        let f = [[1.0 + g[0][0], g[0][1]], [g[1][0], 1.0 + g[1][1]]];
        let p: [[f64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|j| f[i][0] * s[0][j] + f[i][1] * s[1][j]));
        let pmax = p.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..2 {
            for j in 0..2 {
                let eps = 1e-6;
                let (mut fp, mut fm) = (f, f);
                fp[i][j] += eps;
                fm[i][j] -= eps;
                let fd = (skeleton_energy(fp, &prm) - skeleton_energy(fm, &prm)) / (2.0 * eps);
                worst = worst.max((fd - p[i][j]).abs() / pmax);
            }
        }
    }
    v.check(worst <= 1e-6, format!("skeleton stress vs energy differences: worst relative error {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// 6. consistency and stability

fn faces(mesh: &Mesh) -> Vec<(usize, FaceGeometry)> {
    let fs = mesh.all_faces();
    fs.faces
        .iter()
        .zip(&fs.h)
        .map(|(&fi, &h)| {
            let f = &mesh.interior_faces[fi];
            let [a, b] = f.elements;
            (fi, face_geometry([mesh.elements[a], mesh.elements[b]], [mesh.coords(a), mesh.coords(b)], f.local_edges, h))
        })
        .collect()
}

fn lcg(s: &mut u64) -> f64 {
    *s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn interface_point() -> InterfacePointData {
    let a: f64 = 0.5;
    InterfacePointData {
        fluid_coords: [[0.0, 0.0], [0.2, 0.02], [0.23, 0.21], [-0.01, 0.19]],
        fluid_xi: [0.3, -0.4],
        poro_element: 0,
        poro_ref_coords: [[0.05, 0.0], [0.2, 0.01], [0.22, 0.15], [0.04, 0.14]],
        poro_xi: [-0.2, 0.6],
        poro_hist: PoroNodalHistory::default(),
        normal: [a.cos(), a.sin()],
        w: 0.013,
        h_gamma: 0.1,
        jumps: Jumps::default(),
    }
}

fn criterion_6(v: &mut Verdict) {
    let fl = FluidParams { rho: 1.0, mu: 1.0 };
    let st = StabConstants::default();
    let ts = TimeParams { theta: 1.0, dt: 0.05 };
    let prm = base_poro();

    // face penalties on fields the discrete space reproduces exactly
    let mesh = build_structured_mesh([0.0, 0.0], [1.0, 1.0], 5, 5, 0.3).unwrap();
    let mut worst_fluid: f64 = 0.0;
    let mut worst_poro: f64 = 0.0;
    for (fi, f) in faces(&mesh) {
        let face = &mesh.interior_faces[fi];
        let mut xf = [0.0; 18];
        let mut xp = [0.0; 30];
        for side in 0..2 {
            for a in 0..4 {
                let q = mesh.nodes[mesh.elements[face.elements[side]][a]];
                let k = f.slots[side][a];
                xf[3 * k..3 * k + 3].copy_from_slice(&[0.3 + 2.0 * q[0] - q[1], -1.0 + 0.5 * q[0] + 0.7 * q[1], 4.0 - 3.0 * q[0] + q[1]]);
                let u = [0.05 * q[0] - 0.02 * q[1], 0.01 * q[0] + 0.03 * q[1]];
                let y = [q[0] + u[0], q[1] + u[1]];
                xp[5 * k..5 * k + 5].copy_from_slice(&[1.0 + y[0] - 2.0 * y[1], 0.5 * y[0] + y[1], u[0], u[1], 3.0 - y[0] + 0.25 * y[1]]);
            }
        }
        let mut r = [0.0; 18];
        fluid_face_residual(&f, true, &fl, &st, &ts, &xf, &mut r);
        worst_fluid = r.iter().fold(worst_fluid, |m, x| m.max(x.abs()));
        let mut r = [0.0; 30];
        poro_face_residual(&f, &fl, &prm, &st, &ts, &xp, &mut r);
        worst_poro = r.iter().fold(worst_poro, |m, x| m.max(x.abs()));
    }
    v.check(worst_fluid <= 1e-12, format!("fluid interior and ghost penalties on linear fields: max residual {worst_fluid:.2e}"));
    v.check(worst_poro <= 1e-12, format!("poro interior penalty on linear fields: max residual {worst_poro:.2e}"));

    // interface adjoint and penalty terms on a state satisfying the interface conditions
    let d0 = interface_point();
    let grad = [[0.4, -0.3], [0.7, -0.4]];
    let mut x = vec![0.0; NDOF];
    for a in 0..4 {
        let c = d0.fluid_coords[a];
        for i in 0..2 {
            x[3 * a + i] = [0.2, -0.1][i] + grad[i][0] * c[0] + grad[i][1] * c[1];
        }
        x[3 * a + 2] = 1.0 + 0.3 * c[0];
    }
    let fs = map_quad(&d0.fluid_coords, d0.fluid_xi);
    let vf: [f64; 2] = std::array::from_fn(|i| (0..4).map(|a| x[3 * a + i] * fs.n[a]).sum());
    let pf: f64 = (0..4).map(|a| x[3 * a + 2] * fs.n[a]).sum();
    let n = d0.normal;
    let sn: [f64; 2] = std::array::from_fn(|i| -pf * n[i] + (0..2).map(|k| (grad[i][k] + grad[k][i]) * n[k]).sum::<f64>());
    let kin = kinematics([[0.0; 2]; 2], 0).unwrap();
    let kappa = slip_coefficient(spatial_permeability(&kin, 0.1), 1.0, 1.0).unwrap();
    let mut d = d0;
    d.jumps.g_n = vf;
    d.jumps.g_t = [vf[0] + kappa * sn[0], vf[1] + kappa * sn[1]];
    let mut worst: f64 = 0.0;
    for zeta in [-1.0, 1.0] {
        let cfg = NitscheConfig { zeta, ..NitscheConfig::default() };
        let mut r = vec![0.0; NDOF];
        interface_residual(&d, &cfg, &fl, &prm, &st, &ts, Terms { consistency: false, ..Terms::ALL }, &x, &mut r).unwrap();
        worst = r.iter().fold(worst, |m, x| m.max(x.abs()));
    }
    let sub = NitscheConfig { tangential: TangentialMethod::Substitution, ..NitscheConfig::default() };
    d.jumps.g_t = vf;
    let mut r = vec![0.0; NDOF];
    let terms = Terms { consistency: false, normal: false, ..Terms::ALL };
    interface_residual(&d, &sub, &fl, &prm, &st, &ts, terms, &x, &mut r).unwrap();
    worst = r.iter().fold(worst, |m, x| m.max(x.abs()));
    v.check(worst <= 1e-13, format!("interface adjoint and penalty terms on a constraint-satisfying state: max {worst:.2e}"));

    // tangential form with the negative adjoint sign on random traces
    let mut s = 12345u64;
    let mut min_q = f64::INFINITY;
    for k_mat in [1e-6, 1e-3, 0.1, 10.0, 1e6] {
        for alpha in [1e-4, 1.0, 1e4] {
            let mut p = prm;
            p.permeability = Permeability::Constant(k_mat);
            let cfg = NitscheConfig { alpha_bj: alpha, ..NitscheConfig::default() };
            let xd = Dual::<NDOF>::seed(&[0.0; NDOF]);
            let mut rd = [Dual::<NDOF>::constant(0.0); NDOF];
            interface_residual(&d0, &cfg, &fl, &p, &st, &ts, Terms { normal: false, ..Terms::ALL }, &xd, &mut rd).unwrap();
            let idx: Vec<usize> = (0..4).flat_map(|a| [3 * a, 3 * a + 1]).collect();
            let kmax = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).fold(0.0f64, |m, (i, j)| m.max(rd[i].d[j].abs()));
            for _ in 0..200 {
                let w: Vec<f64> = idx.iter().map(|_| lcg(&mut s)).collect();
                let q: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| w[a] * idx.iter().enumerate().map(|(b, &j)| rd[i].d[j] * w[b]).sum::<f64>())
                    .sum();
                min_q = min_q.min(q / kmax.max(f64::MIN_POSITIVE));
            }
        }
    }
    v.check(min_q >= -1e-12, format!("tangential form positive semidefinite on random fluid traces: min scaled quadratic form {min_q:.2e}"));

    // global analytic and element finite-difference Jacobians against residual differences
    for tangential in [TangentialMethod::Nitsche, TangentialMethod::Substitution] {
        let prm = MmsParams::default();
        let nit = NitscheConfig { tangential, ..NitscheConfig::default() };
        let model = build_rotated_squares(0.25, &prm, nit, TimeParams { theta: 1.0, dt: 0.05 }, true).unwrap();
        let mms = Mms::new(prm);
        let s0 = State::initial(&model, &mms, 0.0).unwrap();
        let topo = model.cut(&s0.displacements()).unwrap();
        let dofs = DofMap::new(&topo, s0.poro.len());
        let bodies = nodal_bodies(&model, &mms, 0.05);
        let ctx = StepContext {
            topo: &topo,
            dofs: &dofs,
            history: &s0,
            t: 0.05,
            fluid_body: &bodies[0],
            poro_fluid_body: &bodies[1],
            poro_solid_body: &bodies[2],
        };
        let mut xs = dofs.pack(&s0);
        let mut seed = 11u64;
        for x in xs.iter_mut() {
            *x += 1e-3 * lcg(&mut seed);
        }
        let mut st1 = s0.clone();
        dofs.unpack(&xs, &mut st1);
        let nd = dofs.len();
        let ka = dense_jacobian(nd, &assemble(&model, &mms, &ctx, &st1, Some(JacobianMode::Analytic)).unwrap().triplets);
        let kf = dense_jacobian(nd, &assemble(&model, &mms, &ctx, &st1, Some(JacobianMode::FiniteDifference)).unwrap().triplets);
        let mut worst: f64 = 0.0;
        for c in 0..nd {
            let h = 1e-6 * xs[c].abs().max(1.0);
            let eval = |dx: f64| {
                let mut xp = xs.clone();
                xp[c] += dx;
                let mut sp = st1.clone();
                dofs.unpack(&xp, &mut sp);
                assemble(&model, &mms, &ctx, &sp, None).unwrap().residual
            };
            let (rp, rm) = (eval(h), eval(-h));
            let col: f64 = (0..nd).map(|i| ka[i][c] * ka[i][c]).sum::<f64>().sqrt().max(1e-12);
            for i in 0..nd {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                worst = worst.max((fd - ka[i][c]).abs() / col).max((kf[i][c] - ka[i][c]).abs() / col);
            }
        }
        v.check(worst <= 1e-5, format!("{tangential:?} Jacobian vs differences on {nd} unknowns: worst relative column error {worst:.2e}"));
    }
}

// ---------------------------------------------------------------------------
// 7. beam

fn criterion_7(v: &mut Verdict) {
    let mut cfg = RunConfig::defaults(StudyKind::Beam);
    cfg.beam.nx = 100;
    cfg.beam.ny = 50;
    cfg.dt = 0.02;
    cfg.t_end = 4.0;
    cfg.vtk_every = 0;
    let out = run_beam(&cfg, &mut quiet).expect("beam");
    let last = *out.samples.last().unwrap();
    v.check(
        out.failure.is_none() && (last.t - 4.0).abs() < 1e-9,
        format!("run reached t = {:.4} ({} samples){}", last.t, out.samples.len(), out.failure.as_ref().map_or(String::new(), |e| format!(", stopped: {e}"))),
    );
    let window: Vec<_> = out.samples.iter().filter(|s| s.t >= 0.5 - 1e-9 && s.t <= 2.0 + 1e-9).collect();
    let positive = !window.is_empty() && window.iter().all(|s| s.tip_displacement[0] > 0.0);
    let monotone = window.windows(2).all(|w| w[1].tip_displacement[0] >= w[0].tip_displacement[0]);
    v.check(
        positive && monotone,
        format!(
            "tip x-displacement over t in [0.5, 2]: {:.4e} -> {:.4e}, positive {positive}, monotone {monotone}",
            window.first().map_or(f64::NAN, |s| s.tip_displacement[0]),
            window.last().map_or(f64::NAN, |s| s.tip_displacement[0])
        ),
    );
    let phi0 = cfg.poro.phi0;
    let (up, down) = (last.probes[0].0, last.probes[1].0);
    v.check(up > phi0, format!("upstream porosity at t = {:.2}: {up:.6} > {phi0}", last.t));
    v.check(down < phi0, format!("downstream porosity at t = {:.2}: {down:.6} < {phi0}", last.t));
}

type Criterion = (usize, &'static str, Duration, fn(&mut Verdict));

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (1, "manufactured-solution convergence orders", Duration::from_secs(20 * 60), criterion_1),
        (2, "penalty sensitivity", Duration::from_secs(15 * 60), criterion_2),
        (3, "porosity and permeability robustness", Duration::from_secs(15 * 60), criterion_3),
        (4, "interface law sweep over alpha", Duration::from_secs(15 * 60), criterion_4),
        (5, "unit oracles", Duration::from_secs(60), criterion_5),
        (6, "consistency and stability", Duration::from_secs(2 * 60), criterion_6),
        (7, "beam qualitative gates", Duration::from_secs(45 * 60), criterion_7),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    // the libtest flags cargo passes are ignored; `--list` prints nothing
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut failed = Vec::new();
    for (id, name, budget, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let mut v = Verdict::new();
        run(&mut v);
        let elapsed = started.elapsed();
        v.check(elapsed <= budget, format!("runtime {:.1} s (budget {} s)", elapsed.as_secs_f64(), budget.as_secs()));
        println!("criterion {id} {name}: {}", if v.pass { "PASS" } else { "FAIL" });
        for d in &v.details {
            println!("    {d}");
        }
        if !v.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
