//! Plain-text run configuration: `key = value` lines with `#` comments.

use std::path::{Path, PathBuf};

use crate::assembly::{JacobianMode, NewtonConfig};
use crate::beam::BeamSetup;
use crate::error::{Error, Result};
use crate::mms::MmsParams;
use crate::params::{FluidParams, NitscheConfig, Permeability, PorosityMode, PoroParams, TangentialMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Convergence,
    Penalty,
    Porosity,
    Alpha,
    Beam,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Convergence => "convergence",
            StudyKind::Penalty => "penalty",
            StudyKind::Porosity => "porosity",
            StudyKind::Alpha => "alpha",
            StudyKind::Beam => "beam",
        }
    }
}

/// Which inverse penalty a penalty sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyTarget {
    Normal,
    Tangential,
}

impl PenaltyTarget {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyTarget::Normal => "normal",
            PenaltyTarget::Tangential => "tangential",
        }
    }
}

/// Beavers–Joseph (β = 1) or Beavers–Joseph–Saffman (β = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterfaceLaw {
    Bj,
    Bjs,
}

impl InterfaceLaw {
    pub fn beta(self) -> f64 {
        match self {
            InterfaceLaw::Bj => 1.0,
            InterfaceLaw::Bjs => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InterfaceLaw::Bj => "bj",
            InterfaceLaw::Bjs => "bjs",
        }
    }
}

pub fn tangential_name(m: TangentialMethod) -> &'static str {
    match m {
        TangentialMethod::Nitsche => "nitsche",
        TangentialMethod::Substitution => "substitution",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub study: StudyKind,
    /// Mesh sizes of the manufactured-solution studies.
    pub h: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub theta: f64,
    pub fluid: FluidParams,
    pub poro: PoroParams,
    /// Interface settings; `beta_bj` and `alpha_bj` are overridden by the sweeps.
    pub nitsche: NitscheConfig,
    pub laws: Vec<InterfaceLaw>,
    pub methods: Vec<TangentialMethod>,
    pub zetas: Vec<f64>,
    pub penalty_targets: Vec<PenaltyTarget>,
    pub gamma_inv_values: Vec<f64>,
    pub porosities: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Manufactured-solution amplitudes and constants; physics come from `fluid` and `poro`.
    pub mms: MmsParams,
    pub newton: NewtonConfig,
    pub beam: BeamSetup,
    /// Write VTK files every this many steps (0 disables).
    pub vtk_every: usize,
    pub out_dir: PathBuf,
}

pub const DEFAULT_H: [f64; 5] = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
pub const DEFAULT_GAMMA_INV: [f64; 9] = [1.0, 3.0, 10.0, 30.0, 45.0, 100.0, 300.0, 1e3, 1e4];
pub const DEFAULT_POROSITIES: [f64; 6] = [0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6];

impl RunConfig {
    pub fn defaults(study: StudyKind) -> RunConfig {
        let mms = MmsParams::default();
        let beam = BeamSetup::default();
        let mut c = RunConfig {
            study,
            h: DEFAULT_H.to_vec(),
            dt: 0.05,
            t_end: 0.1,
            theta: 1.0,
            fluid: mms.fluid,
            poro: mms.poro,
            nitsche: NitscheConfig::default(),
            laws: vec![InterfaceLaw::Bj, InterfaceLaw::Bjs],
            methods: vec![TangentialMethod::Nitsche],
            zetas: vec![-1.0],
            penalty_targets: vec![PenaltyTarget::Tangential, PenaltyTarget::Normal],
            gamma_inv_values: DEFAULT_GAMMA_INV.to_vec(),
            porosities: DEFAULT_POROSITIES.to_vec(),
            alphas: vec![1.0],
            mms,
            newton: NewtonConfig::default(),
            beam: beam.clone(),
            vtk_every: 0,
            out_dir: PathBuf::from("output"),
        };
        match study {
            StudyKind::Convergence => {}
            StudyKind::Penalty => {
                c.h = vec![0.03125];
                c.laws = vec![InterfaceLaw::Bj];
                c.zetas = vec![-1.0, 1.0];
            }
            StudyKind::Porosity => {
                c.h = vec![0.03125];
                c.laws = vec![InterfaceLaw::Bj];
                c.methods = vec![TangentialMethod::Nitsche, TangentialMethod::Substitution];
                c.alphas = vec![1.0, 10.0];
                c.mms.a_p = -1e-5;
                c.mms.a_ps = -1e-5;
                c.poro.permeability = Permeability::KozenyCarman { k_ref: 0.1, phi_ref: 0.5 };
            }
            StudyKind::Alpha => {
                c.h = vec![0.03125];
                c.methods = vec![TangentialMethod::Nitsche, TangentialMethod::Substitution];
                c.alphas = (-8..=8).map(|k| 10f64.powi(k)).collect();
            }
            StudyKind::Beam => {
                c.dt = beam.time.dt;
                c.t_end = 4.0;
                c.theta = beam.time.theta;
                c.fluid = beam.fluid;
                c.poro = beam.poro;
                c.nitsche = beam.nitsche;
                c.vtk_every = 10;
            }
        }
        c
    }
}

/// Accepted keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("study", "convergence | penalty | porosity | alpha | beam (default convergence)"),
    ("h", "comma-separated mesh sizes; each must divide 0.5"),
    ("dt", "time step"),
    ("t_end", "final time"),
    ("theta", "one-step-theta parameter in (0, 1]"),
    ("rho", "fluid density"),
    ("mu", "fluid dynamic viscosity"),
    ("porosity", "initial porosity"),
    ("porosity_mode", "constant | constitutive"),
    ("permeability_law", "constant | kozeny_carman"),
    ("permeability", "material permeability for the constant law"),
    ("kc_k_ref", "Kozeny-Carman reference permeability"),
    ("kc_phi_ref", "Kozeny-Carman reference porosity"),
    ("youngs_modulus", "skeleton Young's modulus"),
    ("poisson_ratio", "skeleton Poisson ratio"),
    ("bulk_modulus", "bulk modulus of the volumetric energy"),
    ("solid_density", "initial solid density"),
    ("gamma_n_inv", "inverse normal Nitsche penalty"),
    ("gamma_t_inv", "inverse tangential Nitsche penalty"),
    ("zeta", "adjoint sign list, entries -1 or 1"),
    ("tangential", "list of nitsche | substitution"),
    ("interface_law", "list of bj | bjs"),
    ("alpha_bj", "list of Beavers-Joseph coefficients"),
    ("penalty_target", "list of tangential | normal (penalty study)"),
    ("gamma_inv_values", "inverse penalties swept by the penalty study"),
    ("porosity_values", "initial porosities swept by the porosity study"),
    ("amp_fluid", "manufactured fluid velocity amplitude"),
    ("amp_poro", "manufactured poro velocity amplitude"),
    ("amp_solid", "manufactured displacement amplitude"),
    ("space_b", "manufactured spatial frequency"),
    ("time_c", "manufactured decay constant"),
    ("newton_max_iterations", "Newton iteration limit"),
    ("newton_rtol", "relative residual tolerance"),
    ("newton_atol", "absolute residual tolerance"),
    ("jacobian", "analytic | finite_difference"),
    ("beam_nx", "background elements along the channel"),
    ("beam_ny", "background elements across the channel"),
    ("beam_width_elements", "poro elements across the beam, multiple of 4"),
    ("beam_height_elements", "poro elements along the straight part of the beam"),
    ("probe_upstream", "reference position x, y of the upstream probe"),
    ("probe_downstream", "reference position x, y of the downstream probe"),
    ("vtk_every", "write VTK files every n steps, 0 disables"),
    ("out_dir", "output directory"),
];

/// Human-readable list of all accepted keys.
pub fn key_reference() -> String {
    let w = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    KEYS.iter().map(|(k, d)| format!("{k:<w$}  {d}\n")).collect()
}

struct Entry<'a> {
    key: &'a str,
    value: &'a str,
    line: usize,
}

impl Entry<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Config { line: self.line, msg: format!("{}: {msg}", self.key) }
    }

    fn num(&self) -> Result<f64> {
        let v: f64 = self.value.parse().map_err(|_| self.err(format!("expected a number, got '{}'", self.value)))?;
        if !v.is_finite() {
            return Err(self.err("value must be finite"));
        }
        Ok(v)
    }

    fn positive(&self) -> Result<f64> {
        let v = self.num()?;
        if v <= 0.0 {
            return Err(self.err("value must be positive"));
        }
        Ok(v)
    }

    fn count(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.err(format!("expected a non-negative integer, got '{}'", self.value)))
    }

    fn items(&self) -> Vec<&str> {
        self.value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }

    fn nums(&self) -> Result<Vec<f64>> {
        let v = self
            .items()
            .into_iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| self.err(format!("expected a number, got '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        if v.is_empty() {
            return Err(self.err("empty list"));
        }
        Ok(v)
    }

    fn positives(&self) -> Result<Vec<f64>> {
        let v = self.nums()?;
        if v.iter().any(|&x| x <= 0.0) {
            return Err(self.err("values must be positive"));
        }
        Ok(v)
    }

    fn choice<T: Copy>(&self, s: &str, options: &[(&str, T)]) -> Result<T> {
        options.iter().find(|(n, _)| *n == s).map(|(_, v)| *v).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            self.err(format!("unknown value '{s}' (expected one of {})", names.join(", ")))
        })
    }

    fn choices<T: Copy>(&self, options: &[(&str, T)]) -> Result<Vec<T>> {
        let v = self.items().into_iter().map(|s| self.choice(s, options)).collect::<Result<Vec<_>>>()?;
        if v.is_empty() {
            return Err(self.err("empty list"));
        }
        Ok(v)
    }

    fn point(&self) -> Result<[f64; 2]> {
        match self.nums()?.as_slice() {
            [x, y] => Ok([*x, *y]),
            _ => Err(self.err("expected two numbers x, y")),
        }
    }
}

const STUDIES: &[(&str, StudyKind)] = &[
    ("convergence", StudyKind::Convergence),
    ("penalty", StudyKind::Penalty),
    ("porosity", StudyKind::Porosity),
    ("alpha", StudyKind::Alpha),
    ("beam", StudyKind::Beam),
];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::Config { line, msg: format!("expected 'key = value', got '{content}'") })?;
        let (key, value) = (k.trim(), v.trim());
        if !KEYS.iter().any(|(n, _)| *n == key) {
            return Err(Error::Config { line, msg: format!("{key}: unknown key") });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Config { line, msg: format!("{key}: duplicate key (first set on line {})", prev.line) });
        }
        if value.is_empty() {
            return Err(Error::Config { line, msg: format!("{key}: missing value") });
        }
        entries.push(Entry { key, value, line });
    }
    let study = match entries.iter().find(|e| e.key == "study") {
        Some(e) => e.choice(e.value, STUDIES)?,
        None => StudyKind::Convergence,
    };
    let mut c = RunConfig::defaults(study);
    let (mut kc_k, mut kc_phi) = match c.poro.permeability {
        Permeability::KozenyCarman { k_ref, phi_ref } => (k_ref, phi_ref),
        Permeability::Constant(_) => (0.1, 0.5),
    };
    let mut k_const = c.poro.k0();
    let mut law_kc = matches!(c.poro.permeability, Permeability::KozenyCarman { .. });
    for e in &entries {
        match e.key {
            "study" => {}
            "h" => c.h = e.positives()?,
            "dt" => c.dt = e.positive()?,
            "t_end" => c.t_end = e.positive()?,
            "theta" => {
                c.theta = e.num()?;
                if !(c.theta > 0.0 && c.theta <= 1.0) {
                    return Err(e.err("theta must lie in (0, 1]"));
                }
            }
            "rho" => c.fluid.rho = e.positive()?,
            "mu" => c.fluid.mu = e.positive()?,
            "porosity" => c.poro.phi0 = e.num()?,
            "porosity_mode" => {
                c.poro.porosity_mode =
                    e.choice(e.value, &[("constant", PorosityMode::Constant), ("constitutive", PorosityMode::Constitutive)])?
            }
            "permeability_law" => law_kc = e.choice(e.value, &[("constant", false), ("kozeny_carman", true)])?,
            "permeability" => k_const = e.positive()?,
            "kc_k_ref" => kc_k = e.positive()?,
            "kc_phi_ref" => kc_phi = e.num()?,
            "youngs_modulus" => c.poro.youngs = e.num()?,
            "poisson_ratio" => c.poro.poisson = e.num()?,
            "bulk_modulus" => c.poro.bulk = e.num()?,
            "solid_density" => c.poro.rho_s0 = e.positive()?,
            "gamma_n_inv" => c.nitsche.gamma_n = 1.0 / e.positive()?,
            "gamma_t_inv" => c.nitsche.gamma_t = 1.0 / e.positive()?,
            "zeta" => {
                c.zetas = e.nums()?;
                if c.zetas.iter().any(|&z| z != 1.0 && z != -1.0) {
                    return Err(e.err("entries must be -1 or 1"));
                }
            }
            "tangential" => {
                c.methods = e.choices(&[("nitsche", TangentialMethod::Nitsche), ("substitution", TangentialMethod::Substitution)])?
            }
            "interface_law" => c.laws = e.choices(&[("bj", InterfaceLaw::Bj), ("bjs", InterfaceLaw::Bjs)])?,
            "alpha_bj" => c.alphas = e.positives()?,
            "penalty_target" => {
                c.penalty_targets = e.choices(&[("tangential", PenaltyTarget::Tangential), ("normal", PenaltyTarget::Normal)])?
            }
            "gamma_inv_values" => c.gamma_inv_values = e.positives()?,
            "porosity_values" => c.porosities = e.positives()?,
            "amp_fluid" => c.mms.a_f = e.num()?,
            "amp_poro" => c.mms.a_p = e.num()?,
            "amp_solid" => c.mms.a_ps = e.num()?,
            "space_b" => c.mms.b = e.num()?,
            "time_c" => c.mms.c = e.positive()?,
            "newton_max_iterations" => c.newton.max_iterations = e.count()?,
            "newton_rtol" => c.newton.rtol = e.positive()?,
            "newton_atol" => c.newton.atol = e.positive()?,
            "jacobian" => {
                c.newton.jacobian =
                    e.choice(e.value, &[("analytic", JacobianMode::Analytic), ("finite_difference", JacobianMode::FiniteDifference)])?
            }
            "beam_nx" => c.beam.nx = e.count()?,
            "beam_ny" => c.beam.ny = e.count()?,
            "beam_width_elements" => c.beam.beam_nx = e.count()?,
            "beam_height_elements" => c.beam.beam_ny = e.count()?,
            "probe_upstream" => c.beam.probes[0] = e.point()?,
            "probe_downstream" => c.beam.probes[1] = e.point()?,
            "vtk_every" => c.vtk_every = e.count()?,
            "out_dir" => c.out_dir = PathBuf::from(e.value),
            other => unreachable!("key {other} listed but not handled"),
        }
    }
    c.poro.permeability =
        if law_kc { Permeability::KozenyCarman { k_ref: kc_k, phi_ref: kc_phi } } else { Permeability::Constant(k_const) };
    c.poro.validate().map_err(|err| Error::Config { line: 0, msg: err.to_string() })?;
    if c.study == StudyKind::Beam && (c.beam.beam_nx % 4 != 0 || c.beam.beam_nx == 0 || c.beam.nx == 0 || c.beam.ny == 0) {
        return Err(Error::Config { line: 0, msg: "beam mesh sizes must be positive, beam_width_elements a multiple of 4".into() });
    }
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
