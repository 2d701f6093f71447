//! Manufactured-solution studies and the beam run, producing CSV tables.

use std::path::Path;

use crate::assembly::{Model, NewtonConfig, State};
use crate::beam::{build_beam, probe, tip_node, BeamData};
use crate::config::{tangential_name, InterfaceLaw, PenaltyTarget, RunConfig, StudyKind};
use crate::error::{Error, Result};
use crate::mms::{build_rotated_squares, error_norms, ErrorReport, Mms, MmsParams, NORM_NAMES};
use crate::output::{clean_cell, fmt_num, write_vtk, Table};
use crate::params::{NitscheConfig, Permeability, PorosityMode, TangentialMethod, TimeParams};
use crate::solver::advance;

/// One manufactured-solution run on the rotated-squares setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsRun {
    pub h: f64,
    pub time: TimeParams,
    pub t_end: f64,
    pub nitsche: NitscheConfig,
    /// Carries the interface law through `alpha_bj` and `beta_bj`.
    pub mms: MmsParams,
    pub newton: NewtonConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run: MmsRun,
    /// Error norms and total Newton iterations, or the failure.
    pub result: std::result::Result<(ErrorReport, usize), Error>,
}

impl RunRecord {
    pub fn norm(&self, name: &str) -> Option<f64> {
        self.result.as_ref().ok().and_then(|(r, _)| r.get(name))
    }
}

fn steps(t_end: f64, dt: f64) -> usize {
    ((t_end / dt).round() as usize).max(1)
}

/// Steps the rotated-squares setup from the analytic initial state to `t_end` and evaluates the norms.
/// With `vtk`, fields are written every `every` steps and at the end.
pub fn run_mms(run: &MmsRun, vtk: Option<(&Path, &str, usize)>) -> Result<(ErrorReport, usize)> {
    let mut model = build_rotated_squares(run.h, &run.mms, run.nitsche, run.time, true)?;
    model.newton = run.newton;
    let mms = Mms::new(run.mms);
    let mut s = State::initial(&model, &mms, 0.0)?;
    let n = steps(run.t_end, run.time.dt);
    let mut iterations = 0;
    let mut topo = None;
    for k in 1..=n {
        let (next, tp, rep) = advance(&model, &mms, &s)?;
        iterations += rep.iterations;
        s = next;
        if let Some((dir, prefix, every)) = vtk {
            if k == n || (every > 0 && k % every == 0) {
                write_vtk(dir, prefix, k, &model, &s, &tp.active_nodes)?;
            }
        }
        topo = Some(tp);
    }
    let topo = topo.expect("at least one step");
    Ok((error_norms(&model, &mms, &s, &topo, run.h)?, iterations))
}

/// Runs of an MMS study in table order.
pub fn plan(cfg: &RunConfig) -> Vec<MmsRun> {
    let time = TimeParams { theta: cfg.theta, dt: cfg.dt };
    let base_mms = MmsParams { fluid: cfg.fluid, poro: cfg.poro, ..cfg.mms };
    let mk = |h: f64, nitsche: NitscheConfig, law: InterfaceLaw, alpha: f64, phi: f64| {
        let mut mms = MmsParams { alpha_bj: alpha, beta_bj: law.beta(), ..base_mms };
        mms.poro.phi0 = phi;
        MmsRun { h, time, t_end: cfg.t_end, nitsche, mms, newton: cfg.newton }
    };
    let phi0 = cfg.poro.phi0;
    let alpha0 = cfg.alphas[0];
    let mut runs = Vec::new();
    match cfg.study {
        StudyKind::Convergence => {
            for &law in &cfg.laws {
                for &method in &cfg.methods {
                    for &zeta in &cfg.zetas {
                        for &h in &cfg.h {
                            runs.push(mk(h, NitscheConfig { tangential: method, zeta, ..cfg.nitsche }, law, alpha0, phi0));
                        }
                    }
                }
            }
        }
        StudyKind::Penalty => {
            for &h in &cfg.h {
                for &law in &cfg.laws {
                    for &method in &cfg.methods {
                        for &target in &cfg.penalty_targets {
                            for &zeta in &cfg.zetas {
                                for &g in &cfg.gamma_inv_values {
                                    let mut ni = NitscheConfig { tangential: method, zeta, ..cfg.nitsche };
                                    match target {
                                        PenaltyTarget::Normal => ni.gamma_n = 1.0 / g,
                                        PenaltyTarget::Tangential => ni.gamma_t = 1.0 / g,
                                    }
                                    runs.push(mk(h, ni, law, alpha0, phi0));
                                }
                            }
                        }
                    }
                }
            }
        }
        StudyKind::Porosity => {
            for &h in &cfg.h {
                for &law in &cfg.laws {
                    for &method in &cfg.methods {
                        for &alpha in &cfg.alphas {
                            for &phi in &cfg.porosities {
                                let ni = NitscheConfig { tangential: method, zeta: cfg.zetas[0], ..cfg.nitsche };
                                runs.push(mk(h, ni, law, alpha, phi));
                            }
                        }
                    }
                }
            }
        }
        StudyKind::Alpha => {
            for &h in &cfg.h {
                for &law in &cfg.laws {
                    for &method in &cfg.methods {
                        for &alpha in &cfg.alphas {
                            let ni = NitscheConfig { tangential: method, zeta: cfg.zetas[0], ..cfg.nitsche };
                            runs.push(mk(h, ni, law, alpha, phi0));
                        }
                    }
                }
            }
        }
        StudyKind::Beam => {}
    }
    runs
}

/// Column names and values describing a run completely.
fn run_columns(run: &MmsRun) -> Vec<(&'static str, String)> {
    let p = &run.mms.poro;
    let (law, k, phi_ref) = match p.permeability {
        Permeability::Constant(k) => ("constant", k, f64::NAN),
        Permeability::KozenyCarman { k_ref, phi_ref } => ("kozeny_carman", k_ref, phi_ref),
    };
    vec![
        ("h", fmt_num(run.h)),
        ("dt", fmt_num(run.time.dt)),
        ("t_end", fmt_num(run.t_end)),
        ("theta", fmt_num(run.time.theta)),
        ("zeta", fmt_num(run.nitsche.zeta)),
        ("gamma_n_inv", fmt_num(1.0 / run.nitsche.gamma_n)),
        ("gamma_t_inv", fmt_num(1.0 / run.nitsche.gamma_t)),
        ("tangential", tangential_name(run.nitsche.tangential).into()),
        ("interface_law", if run.mms.beta_bj == 0.0 { "bjs" } else { "bj" }.into()),
        ("alpha_bj", fmt_num(run.mms.alpha_bj)),
        ("porosity", fmt_num(p.phi0)),
        ("porosity_mode", porosity_mode_name(p.porosity_mode).into()),
        ("permeability_law", law.into()),
        ("permeability", fmt_num(k)),
        ("kc_phi_ref", fmt_num(phi_ref)),
        ("rho", fmt_num(run.mms.fluid.rho)),
        ("mu", fmt_num(run.mms.fluid.mu)),
        ("youngs_modulus", fmt_num(p.youngs)),
        ("poisson_ratio", fmt_num(p.poisson)),
        ("bulk_modulus", fmt_num(p.bulk)),
        ("solid_density", fmt_num(p.rho_s0)),
        ("amp_fluid", fmt_num(run.mms.a_f)),
        ("amp_poro", fmt_num(run.mms.a_p)),
        ("amp_solid", fmt_num(run.mms.a_ps)),
        ("space_b", fmt_num(run.mms.b)),
        ("time_c", fmt_num(run.mms.c)),
        ("jacobian", jacobian_name(run.newton).into()),
    ]
}

fn porosity_mode_name(m: PorosityMode) -> &'static str {
    match m {
        PorosityMode::Constant => "constant",
        PorosityMode::Constitutive => "constitutive",
    }
}

fn jacobian_name(n: NewtonConfig) -> &'static str {
    match n.jacobian {
        crate::assembly::JacobianMode::Analytic => "analytic",
        crate::assembly::JacobianMode::FiniteDifference => "finite_difference",
    }
}

/// Observed order `log(e_prev / e) / log(h_prev / h)` against the previous
/// successful run that differs only in `h`.
pub fn observed_orders(records: &[RunRecord]) -> Vec<Option<[f64; 13]>> {
    let same_group = |a: &MmsRun, b: &MmsRun| MmsRun { h: 0.0, ..*a } == MmsRun { h: 0.0, ..*b };
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let Ok((e, _)) = &r.result else {
            out.push(None);
            continue;
        };
        let prev = records[..i].iter().rev().find(|p| same_group(&p.run, &r.run) && p.result.is_ok() && p.run.h > r.run.h);
        out.push(prev.map(|p| {
            let (ep, _) = p.result.as_ref().expect("checked");
            let lh = (p.run.h / r.run.h).ln();
            std::array::from_fn(|k| (ep.values[k] / e.values[k]).ln() / lh)
        }));
    }
    out
}

pub fn mms_table(study: StudyKind, records: &[RunRecord]) -> Table {
    let with_orders = study == StudyKind::Convergence;
    let Some(first) = records.first() else {
        return Table::new(vec!["study".into(), "status".into()]);
    };
    let mut header: Vec<String> = vec!["study".into(), "status".into()];
    header.extend(run_columns(&first.run).into_iter().map(|(k, _)| k.to_string()));
    header.push("newton_iterations".into());
    header.extend(NORM_NAMES.iter().map(|s| s.to_string()));
    if with_orders {
        header.extend(NORM_NAMES.iter().map(|s| format!("order_{s}")));
    }
    header.push("message".into());
    let orders = observed_orders(records);
    let mut t = Table::new(header);
    for (r, ord) in records.iter().zip(orders) {
        let mut row = vec![study.name().to_string()];
        row.push(if r.result.is_ok() { "ok" } else { "failed" }.into());
        row.extend(run_columns(&r.run).into_iter().map(|(_, v)| v));
        match &r.result {
            Ok((e, it)) => {
                row.push(it.to_string());
                row.extend(e.values.iter().map(|&v| fmt_num(v)));
            }
            Err(_) => {
                row.push(String::new());
                row.extend((0..13).map(|_| fmt_num(f64::NAN)));
            }
        }
        if with_orders {
            row.extend((0..13).map(|k| fmt_num(ord.map_or(f64::NAN, |o| o[k]))));
        }
        row.push(r.result.as_ref().err().map_or(String::new(), |e| clean_cell(&e.to_string())));
        t.push(row);
    }
    t
}

/// Runs every planned MMS run; failures are recorded and the study continues.
pub fn run_mms_study(cfg: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<Vec<RunRecord>> {
    let runs = plan(cfg);
    let mut records = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let prefix = format!("{}_{:03}", cfg.study.name(), i);
        let vtk = (cfg.vtk_every > 0).then_some((cfg.out_dir.as_path(), prefix.as_str(), cfg.vtk_every));
        let started = std::time::Instant::now();
        let result = run_mms(run, vtk);
        if let Err(Error::Io(e)) = &result {
            return Err(Error::Io(e.clone()));
        }
        progress(&format!(
            "run {}/{} h={} zeta={} gamma_n_inv={} gamma_t_inv={} {} beta={} alpha={} phi={}: {} ({:.1?})",
            i + 1,
            runs.len(),
            run.h,
            run.nitsche.zeta,
            1.0 / run.nitsche.gamma_n,
            1.0 / run.nitsche.gamma_t,
            tangential_name(run.nitsche.tangential),
            run.mms.beta_bj,
            run.mms.alpha_bj,
            run.mms.poro.phi0,
            match &result {
                Ok((_, it)) => format!("ok, {it} Newton iterations"),
                Err(e) => format!("failed: {e}"),
            },
            started.elapsed()
        ));
        records.push(RunRecord { run: *run, result });
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSample {
    pub t: f64,
    pub tip_displacement: [f64; 2],
    /// Porosity and pressure at the upstream and downstream probes.
    pub probes: [(f64, f64); 2],
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct BeamOutcome {
    pub samples: Vec<BeamSample>,
    /// Set when the run stopped early.
    pub failure: Option<Error>,
}

fn beam_sample(model: &Model, s: &State, cfg: &RunConfig, tip: usize, iterations: usize) -> Result<BeamSample> {
    let mut probes = [(0.0, 0.0); 2];
    for (k, x) in cfg.beam.probes.iter().enumerate() {
        let (phi, p, _) = probe(model, s, *x)?;
        probes[k] = (phi, p);
    }
    Ok(BeamSample { t: s.t, tip_displacement: s.poro[tip].u, probes, iterations })
}

pub fn beam_setup(cfg: &RunConfig) -> crate::beam::BeamSetup {
    let mut b = cfg.beam.clone();
    b.fluid = cfg.fluid;
    b.poro = cfg.poro;
    b.nitsche = cfg.nitsche;
    b.nitsche.tangential = cfg.methods[0];
    b.nitsche.zeta = cfg.zetas[0];
    b.nitsche.alpha_bj = cfg.alphas[0];
    b.nitsche.beta_bj = cfg.laws[0].beta();
    b.time = TimeParams { theta: cfg.theta, dt: cfg.dt };
    b
}

/// Runs the beam to `t_end`, recording tip and probe histories. A failing
/// step ends the run and keeps the samples so far.
pub fn run_beam(cfg: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<BeamOutcome> {
    let setup = beam_setup(cfg);
    let mut model = build_beam(&setup)?;
    model.newton = cfg.newton;
    let data = BeamData { height: setup.geometry.height };
    let tip = tip_node(&model).ok_or_else(|| Error::InvalidArgument("empty beam mesh".into()))?;
    let mut s = State::initial(&model, &data, 0.0)?;
    let mut samples = vec![beam_sample(&model, &s, cfg, tip, 0)?];
    if cfg.vtk_every > 0 {
        let topo = model.cut(&s.displacements())?;
        write_vtk(&cfg.out_dir, "beam", 0, &model, &s, &topo.active_nodes)?;
    }
    let n = steps(cfg.t_end, cfg.dt);
    for k in 1..=n {
        let (next, topo, rep) = match advance(&model, &data, &s) {
            Ok(v) => v,
            Err(e) => {
                progress(&format!("step {k} failed: {e}"));
                return Ok(BeamOutcome { samples, failure: Some(e) });
            }
        };
        s = next;
        let sample = match beam_sample(&model, &s, cfg, tip, rep.iterations) {
            Ok(v) => v,
            Err(e) => return Ok(BeamOutcome { samples, failure: Some(e) }),
        };
        progress(&format!(
            "step {k}/{n} t={:.4} iterations={} tip_ux={:.6e} phi_up={:.6} phi_down={:.6}",
            s.t, rep.iterations, sample.tip_displacement[0], sample.probes[0].0, sample.probes[1].0
        ));
        samples.push(sample);
        if cfg.vtk_every > 0 && (k % cfg.vtk_every == 0 || k == n) {
            write_vtk(&cfg.out_dir, "beam", k, &model, &s, &topo.active_nodes)?;
        }
    }
    Ok(BeamOutcome { samples, failure: None })
}

pub fn beam_table(cfg: &RunConfig, outcome: &BeamOutcome) -> Table {
    let b = beam_setup(cfg);
    let (law, k, phi_ref) = match b.poro.permeability {
        Permeability::Constant(k) => ("constant", k, f64::NAN),
        Permeability::KozenyCarman { k_ref, phi_ref } => ("kozeny_carman", k_ref, phi_ref),
    };
    let params: Vec<(&str, String)> = vec![
        ("background_nx", b.nx.to_string()),
        ("background_ny", b.ny.to_string()),
        ("beam_width_elements", b.beam_nx.to_string()),
        ("beam_height_elements", b.beam_ny.to_string()),
        ("dt", fmt_num(b.time.dt)),
        ("t_end", fmt_num(cfg.t_end)),
        ("theta", fmt_num(b.time.theta)),
        ("zeta", fmt_num(b.nitsche.zeta)),
        ("gamma_n_inv", fmt_num(1.0 / b.nitsche.gamma_n)),
        ("gamma_t_inv", fmt_num(1.0 / b.nitsche.gamma_t)),
        ("tangential", tangential_name(b.nitsche.tangential).into()),
        ("interface_law", if b.nitsche.beta_bj == 0.0 { "bjs" } else { "bj" }.into()),
        ("alpha_bj", fmt_num(b.nitsche.alpha_bj)),
        ("porosity", fmt_num(b.poro.phi0)),
        ("porosity_mode", porosity_mode_name(b.poro.porosity_mode).into()),
        ("permeability_law", law.into()),
        ("permeability", fmt_num(k)),
        ("kc_phi_ref", fmt_num(phi_ref)),
        ("rho", fmt_num(b.fluid.rho)),
        ("mu", fmt_num(b.fluid.mu)),
        ("youngs_modulus", fmt_num(b.poro.youngs)),
        ("poisson_ratio", fmt_num(b.poro.poisson)),
        ("bulk_modulus", fmt_num(b.poro.bulk)),
        ("solid_density", fmt_num(b.poro.rho_s0)),
        ("probe_upstream_x", fmt_num(b.probes[0][0])),
        ("probe_upstream_y", fmt_num(b.probes[0][1])),
        ("probe_downstream_x", fmt_num(b.probes[1][0])),
        ("probe_downstream_y", fmt_num(b.probes[1][1])),
        ("jacobian", jacobian_name(cfg.newton).into()),
    ];
    let mut header: Vec<String> = vec!["study".into(), "status".into()];
    header.extend(params.iter().map(|(k, _)| k.to_string()));
    header.extend(
        ["t", "tip_ux", "tip_uy", "upstream_porosity", "upstream_pressure", "downstream_porosity", "downstream_pressure", "newton_iterations"]
            .map(String::from),
    );
    let mut t = Table::new(header);
    let status = if outcome.failure.is_some() { "failed" } else { "ok" };
    for sm in &outcome.samples {
        let mut row = vec!["beam".to_string(), status.to_string()];
        row.extend(params.iter().map(|(_, v)| v.clone()));
        row.extend([
            fmt_num(sm.t),
            fmt_num(sm.tip_displacement[0]),
            fmt_num(sm.tip_displacement[1]),
            fmt_num(sm.probes[0].0),
            fmt_num(sm.probes[0].1),
            fmt_num(sm.probes[1].0),
            fmt_num(sm.probes[1].1),
            sm.iterations.to_string(),
        ]);
        t.push(row);
    }
    t
}

/// Result of a complete study.
#[derive(Clone, Debug)]
pub struct StudyOutput {
    pub table: Table,
    pub csv_path: std::path::PathBuf,
    /// Failed runs, or 1 if the beam run stopped early.
    pub failed: usize,
    pub total: usize,
}

/// Runs the configured study and writes `<study>.csv` into the output directory.
pub fn run_study(cfg: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<StudyOutput> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join(format!("{}.csv", cfg.study.name()));
    let (table, failed, total) = if cfg.study == StudyKind::Beam {
        let outcome = run_beam(cfg, progress)?;
        (beam_table(cfg, &outcome), outcome.failure.is_some() as usize, 1)
    } else {
        let records = run_mms_study(cfg, progress)?;
        let failed = records.iter().filter(|r| r.result.is_err()).count();
        (mms_table(cfg.study, &records), failed, records.len())
    };
    table.write(&csv_path)?;
    Ok(StudyOutput { table, csv_path, failed, total })
}

/// Convenience used by tests: the run of `cfg` with tangential method and law fixed.
pub fn single_run(cfg: &RunConfig, h: f64, method: TangentialMethod, law: InterfaceLaw) -> MmsRun {
    let mut c = cfg.clone();
    c.study = StudyKind::Convergence;
    c.h = vec![h];
    c.methods = vec![method];
    c.laws = vec![law];
    c.zetas = vec![c.zetas[0]];
    plan(&c)[0]
}
