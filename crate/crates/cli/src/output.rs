//! Tables, snapshots and summaries.
//!
//! Every CSV starts with `#` comment lines carrying the full parameter set and
//! the units of each column, followed by a single header row.

use std::fmt::Write as _;
use std::path::Path;

use membrane_core::{DiagnosticsRow, GridField, SpectralField};
use serde::Serialize;

use crate::error::CliError;

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// `# key = value` lines for every leaf of `params`, in sorted key order.
pub fn parameter_comments(params: &impl Serialize) -> String {
    let value = serde_json::to_value(params).expect("parameters serialize");
    let mut leaves = Vec::new();
    flatten("", &value, &mut leaves);
    let mut s = String::new();
    for (k, v) in leaves {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// A CSV table under construction.
pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    /// `columns` are `(name, unit)` pairs.
    pub fn new(title: &str, params: &impl Serialize, columns: &[(&str, &str)]) -> Self {
        let mut text = format!("# {title}\n");
        text.push_str(&parameter_comments(params));
        let units: Vec<String> = columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
        let _ = writeln!(text, "# units: {}", units.join(", "));
        let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
        let _ = writeln!(text, "{}", names.join(","));
        Self { text, columns: columns.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub const DIAGNOSTIC_COLUMNS: [(&str, &str); 8] = [
    ("t", "time"),
    ("E_reduced", "energy"),
    ("J_eps", "energy"),
    ("K", "energy"),
    ("mass", "mean of phi"),
    ("lambda", "energy per area"),
    ("rhs_norm", "1/time"),
    ("dt", "time"),
];

pub fn diagnostics_table(params: &impl Serialize, rows: &[DiagnosticsRow]) -> Table {
    let mut t = Table::new("relax diagnostics", params, &DIAGNOSTIC_COLUMNS);
    for r in rows {
        t.row(&[r.t, r.energy, r.j_eps, r.k, r.mass, r.lambda, r.rhs_norm, r.dt]);
    }
    t
}

/// Plain-text lat-lon matrix: one row per colatitude ring, first column the
/// colatitude, then the values at longitudes `2πk/n_phi`.
pub fn latlon_matrix(name: &str, field: &GridField, t: f64, step: u64) -> String {
    let g = field.grid();
    let n_phi = g.n_phi();
    let mut s = String::new();
    let _ = writeln!(s, "# {name} at t = {t:e}, step = {step}");
    let _ = writeln!(s, "# {} rings x {} longitudes; column 0 is the colatitude", g.n_theta(), n_phi);
    for (j, &theta) in g.colatitudes().iter().enumerate() {
        let _ = write!(s, "{theta:e}");
        for v in &field.values()[j * n_phi..(j + 1) * n_phi] {
            let _ = write!(s, " {v:e}");
        }
        s.push('\n');
    }
    s
}

/// Legacy-VTK structured grid on the sphere with `φ` and `u` as point data.
/// The longitude seam is closed by repeating the first column.
pub fn vtk_structured(phi: &SpectralField, u: &SpectralField, t: f64) -> String {
    let g = phi.grid();
    let (n_theta, n_phi) = (g.n_theta(), g.n_phi());
    let r = g.radius();
    let cols = n_phi + 1;
    let n = n_theta * cols;
    let phi_g = phi.synthesize();
    let u_g = u.synthesize();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nmembrane t = {t:e}\nASCII\nDATASET STRUCTURED_GRID");
    let _ = writeln!(s, "DIMENSIONS {cols} {n_theta} 1\nPOINTS {n} double");
    for &theta in g.colatitudes() {
        for k in 0..cols {
            let lon = g.longitude(k % n_phi);
            let _ = writeln!(
                s,
                "{:e} {:e} {:e}",
                r * theta.sin() * lon.cos(),
                r * theta.sin() * lon.sin(),
                r * theta.cos()
            );
        }
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for (name, field) in [("phi", &phi_g), ("u", &u_g)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for j in 0..n_theta {
            for k in 0..cols {
                let _ = writeln!(s, "{:e}", field.values()[j * n_phi + k % n_phi]);
            }
        }
    }
    s
}
