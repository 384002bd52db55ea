//! Writers for tables, meshes, fields and matrices.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::cell::EffectiveTensor;
use crate::error::Result;
use crate::fem::{MixedField, P2Space};
use crate::geometry::{Mesh, Region};
use crate::macroscale::PicardStep;
use crate::sparse::CsrMatrix;
use crate::verify::{ConvergenceReport, DiluteReport};

/// Version written into the first line of every CSV table.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// A CSV table with a `# susphom-csv schema=N table=NAME` comment header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        CsvTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = format!("# susphom-csv schema={CSV_SCHEMA_VERSION} table={}\n", self.name).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).expect("writing to memory");
            for r in &self.rows {
                w.write_record(r).expect("writing to memory");
            }
            w.flush().expect("writing to memory");
        }
        String::from_utf8(out).expect("utf-8 input")
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn convergence_csv(report: &ConvergenceReport) -> CsvTable {
    let mut t = CsvTable::new(
        "convergence",
        &[
            "eps",
            "seed",
            "energy_micro",
            "energy_star",
            "energy_gap",
            "l2_gap",
            "h1_gap",
            "corrected_h1_gap",
            "corrector_l2",
            "picard_iterations",
            "weak_residual",
            "rigid_residual",
        ],
    );
    for r in &report.rows {
        t.push(vec![
            num(r.eps),
            r.seed.to_string(),
            num(r.energy_micro),
            num(r.energy_star),
            num(r.energy_gap),
            num(r.l2),
            num(r.h1),
            num(r.corrected_h1),
            num(r.corrector_l2),
            r.picard_iterations.to_string(),
            num(r.weak_residual),
            num(r.rigid_residual),
        ]);
    }
    t
}

pub fn dilute_csv(report: &DiluteReport) -> CsvTable {
    let mut t = CsvTable::new(
        "dilute",
        &["phi", "h", "measured_phi", "shear_excess", "normal_excess", "c_trace"],
    );
    for r in &report.rows {
        t.push(vec![
            num(r.phi),
            num(r.h),
            num(r.measured_phi),
            num(r.shear_excess),
            num(r.normal_excess),
            num(r.c_trace),
        ]);
    }
    t
}

/// Gram matrix of `C` and the matrix of `mu*` on the orthonormal deviatoric basis.
pub fn tensor_csv(t: &EffectiveTensor) -> CsvTable {
    let mut out = CsvTable::new("tensor", &["quantity", "i", "j", "value"]);
    for i in 0..2 {
        for j in 0..2 {
            out.push(vec!["C".into(), i.to_string(), j.to_string(), num(t.c_matrix[i][j])]);
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            out.push(vec!["mu_star".into(), i.to_string(), j.to_string(), num(t.mu_star[i][j])]);
        }
    }
    out.push(vec!["mu".into(), "".into(), "".into(), num(t.mu)]);
    out.push(vec!["asymmetry".into(), "".into(), "".into(), num(t.asymmetry())]);
    out
}

pub fn picard_csv(trace: &[PicardStep]) -> CsvTable {
    let mut t = CsvTable::new("picard", &["iteration", "increment", "energy"]);
    for s in trace {
        t.push(vec![s.iteration.to_string(), num(s.increment), num(s.energy)]);
    }
    t
}

/// Legacy ASCII VTK (v3.0) of a mesh with 6-node triangles, region tags per cell and,
/// if given, velocity and pressure per node (pressure linearly interpolated to midpoints).
pub fn vtk_legacy(mesh: &Mesh, space: &P2Space, field: Option<&MixedField>, title: &str) -> String {
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", space.n_nodes());
    for p in &space.coords {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 7 * nt);
    for n in &space.tri_nodes {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", n[0], n[1], n[2], n[3], n[4], n[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("22\n");
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for r in &mesh.regions {
        let tag = match r {
            Region::Fluid => -1,
            Region::Rigid(p) => *p as i64,
        };
        let _ = writeln!(s, "{tag}");
    }
    if let Some(f) = field {
        let _ = writeln!(s, "POINT_DATA {}\nVECTORS velocity double", space.n_nodes());
        for u in &f.velocity {
            let _ = writeln!(s, "{:e} {:e} 0", u[0], u[1]);
        }
        let mut p = vec![0.0; space.n_nodes()];
        p[..space.n_vertices].copy_from_slice(&f.pressure);
        for (e, &[a, b]) in space.edges.iter().enumerate() {
            p[space.n_vertices + e] = 0.5 * (f.pressure[a] + f.pressure[b]);
        }
        let _ = writeln!(s, "SCALARS pressure double 1\nLOOKUP_TABLE default");
        for x in p {
            let _ = writeln!(s, "{x:e}");
        }
    }
    s
}

/// Matrix Market coordinate format, one-based indices.
pub fn matrix_market(m: &CsrMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.nrows, m.ncols, m.values.len());
    for r in 0..m.nrows {
        for k in m.indptr[r]..m.indptr[r + 1] {
            let _ = writeln!(s, "{} {} {:e}", r + 1, m.indices[k] + 1, m.values[k]);
        }
    }
    s
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Write `bytes` to a temporary sibling of `path`, then rename it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::structured_mesh;

    #[test]
    fn csv_has_schema_header() {
        let mut t = CsvTable::new("demo", &["a", "b"]);
        t.push(vec!["1".into(), num(0.5)]);
        let s = t.render();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("# susphom-csv schema=1 table=demo"));
        assert_eq!(lines.next(), Some("a,b"));
        assert_eq!(lines.next(), Some("1,5e-1"));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn vtk_counts_match_mesh() {
        let mesh = structured_mesh(&[0.0, 1.0], &[0.0, 1.0], [0.5, 0.5]);
        let space = P2Space::new(&mesh);
        let f = MixedField::zeros(&space);
        let s = vtk_legacy(&mesh, &space, Some(&f), "t");
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains(&format!("POINTS {} double", space.n_nodes())));
        assert!(s.contains(&format!("CELLS {} {}", mesh.n_triangles(), 7 * mesh.n_triangles())));
        assert!(s.contains(&format!("POINT_DATA {}", space.n_nodes())));
    }

    #[test]
    fn matrix_market_is_one_based() {
        let m = CsrMatrix {
            nrows: 2,
            ncols: 2,
            indptr: vec![0, 1, 2],
            indices: vec![1, 0],
            values: vec![2.0, 3.0],
        };
        let s = matrix_market(&m);
        assert!(s.contains("2 2 2\n1 2 2e0\n2 1 3e0\n"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("susphom-io-{}", std::process::id()));
        let p = dir.join("x.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        fs::remove_dir_all(&dir).unwrap();
    }
}
