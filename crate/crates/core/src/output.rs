//! CSV tables and legacy ASCII VTK files.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{Model, State};
use crate::error::Result;
use crate::mesh::Mesh;

/// Scientific notation with 9 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.8e}")
    }
}

/// CSV cell: commas and line breaks would break the table.
pub fn clean_cell(s: &str) -> String {
    s.chars().map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c }).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Table {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn vtk_mesh(out: &mut String, title: &str, points: &[[f64; 2]], mesh: &Mesh) {
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(out, "{} {} 0", p[0], p[1]);
    }
    let n = mesh.elements.len();
    let _ = writeln!(out, "CELLS {n} {}", 5 * n);
    for el in &mesh.elements {
        let _ = writeln!(out, "4 {} {} {} {}", el[0], el[1], el[2], el[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {n}");
    for _ in 0..n {
        out.push_str("9\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", points.len());
}

fn vtk_vectors(out: &mut String, name: &str, v: impl Iterator<Item = [f64; 2]>) {
    let _ = writeln!(out, "VECTORS {name} double");
    for a in v {
        let _ = writeln!(out, "{} {} 0", a[0], a[1]);
    }
}

fn vtk_scalars(out: &mut String, name: &str, kind: &str, v: impl Iterator<Item = String>) {
    let _ = writeln!(out, "SCALARS {name} {kind} 1\nLOOKUP_TABLE default");
    for a in v {
        out.push_str(&a);
        out.push('\n');
    }
}

/// Background mesh with the fluid fields. Inactive nodes carry their extended
/// values and `active = 0`.
pub fn fluid_vtk(model: &Model, s: &State, active: &[bool]) -> String {
    let mut out = String::new();
    vtk_mesh(&mut out, &format!("fluid t={}", s.t), &model.fluid_mesh.nodes, &model.fluid_mesh);
    vtk_vectors(&mut out, "velocity", s.fluid.iter().map(|n| n.v));
    vtk_scalars(&mut out, "pressure", "double", s.fluid.iter().map(|n| n.p.to_string()));
    vtk_scalars(&mut out, "active", "int", active.iter().map(|&a| (a as i32).to_string()));
    out
}

/// Poro mesh in the current configuration. Porosity is the nodal average of
/// the element mean over the Gauss points.
pub fn poro_vtk(model: &Model, s: &State) -> Option<String> {
    let pd = model.poro.as_ref()?;
    let pts: Vec<[f64; 2]> =
        pd.mesh.nodes.iter().zip(&s.poro).map(|(x, n)| [x[0] + n.u[0], x[1] + n.u[1]]).collect();
    let mut sum = vec![0.0; pts.len()];
    let mut cnt = vec![0usize; pts.len()];
    for (e, el) in pd.mesh.elements.iter().enumerate() {
        let mean = s.phi.get(e).map_or(f64::NAN, |q| q.iter().sum::<f64>() / 4.0);
        for &a in el {
            sum[a] += mean;
            cnt[a] += 1;
        }
    }
    let mut out = String::new();
    vtk_mesh(&mut out, &format!("poro t={}", s.t), &pts, &pd.mesh);
    vtk_vectors(&mut out, "velocity", s.poro.iter().map(|n| n.v));
    vtk_vectors(&mut out, "displacement", s.poro.iter().map(|n| n.u));
    vtk_scalars(&mut out, "pressure", "double", s.poro.iter().map(|n| n.p.to_string()));
    vtk_scalars(
        &mut out,
        "porosity",
        "double",
        sum.iter().zip(&cnt).map(|(s, &c)| (if c > 0 { s / c as f64 } else { f64::NAN }).to_string()),
    );
    Some(out)
}

/// Writes `{prefix}_fluid_{step}.vtk` and, with a poro domain, `{prefix}_poro_{step}.vtk`.
pub fn write_vtk(dir: &Path, prefix: &str, step: usize, model: &Model, s: &State, active: &[bool]) -> Result<()> {
    std::fs::write(dir.join(format!("{prefix}_fluid_{step:05}.vtk")), fluid_vtk(model, s, active))?;
    if let Some(p) = poro_vtk(model, s) {
        std::fs::write(dir.join(format!("{prefix}_poro_{step:05}.vtk")), p)?;
    }
    Ok(())
}
