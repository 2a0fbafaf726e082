//! JSON mesh files and SVG rendering.
//!
//! A mesh file looks like
//!
//! ```json
//! {
//!   "vertices": [["0", "1", "1", "2"], ...],
//!   "triangles": [[0, 1, 2], ...],
//!   "values": ["0.5", ...]
//! }
//! ```
//!
//! where each vertex is `[num_x, den_x, num_y, den_y]` as decimal integer
//! strings and `values` (optional) holds shortest round-trip decimal floats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{CpwlFunction, Point, Rational, Triangulation};
use crate::error::{HtvError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<[String; 4]>,
    triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
}

fn parse_rational(num: &str, den: &str) -> Result<Rational> {
    let n: BigInt = num.trim().parse().map_err(|_| HtvError::MalformedFile(format!("bad integer `{num}`")))?;
    let d: BigInt = den.trim().parse().map_err(|_| HtvError::MalformedFile(format!("bad integer `{den}`")))?;
    if d.is_zero() {
        return Err(HtvError::MalformedFile("zero denominator".into()));
    }
    Ok(Rational::new(n, d))
}

pub fn mesh_to_json(g: &CpwlFunction) -> String {
    let mesh = g.mesh();
    let file = MeshFile {
        vertices: mesh
            .vertices()
            .iter()
            .map(|p| [p.x.numer().to_string(), p.x.denom().to_string(), p.y.numer().to_string(), p.y.denom().to_string()])
            .collect(),
        triangles: mesh.triangles().to_vec(),
        values: Some(g.values().iter().map(|v| format!("{v:?}")).collect()),
    };
    serde_json::to_string_pretty(&file).expect("mesh serialises")
}

/// Parses a mesh file; missing `values` default to zero.
pub fn mesh_from_json(text: &str) -> Result<CpwlFunction> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| HtvError::MalformedFile(e.to_string()))?;
    let vertices = file
        .vertices
        .iter()
        .map(|[nx, dx, ny, dy]| Ok(Point::new(parse_rational(nx, dx)?, parse_rational(ny, dy)?)))
        .collect::<Result<Vec<_>>>()?;
    let n = vertices.len();
    let mesh = Arc::new(Triangulation::new(vertices, file.triangles)?);
    let values = match file.values {
        None => vec![0.0; n],
        Some(vs) => vs
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| HtvError::MalformedFile(format!("bad value `{s}`"))))
            .collect::<Result<Vec<_>>>()?,
    };
    CpwlFunction::new(mesh, values).map_err(|e| HtvError::MalformedFile(e.to_string()))
}

pub fn save_mesh(g: &CpwlFunction, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mesh_to_json(g))?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<CpwlFunction> {
    mesh_from_json(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone)]
pub struct SvgOptions {
    /// Width and height of the drawing in pixels.
    pub size: f64,
    /// Colour triangles by their mean vertex value.
    pub fill_by_value: bool,
    pub stroke_width: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { size: 800.0, fill_by_value: false, stroke_width: 0.5 }
    }
}

/// One `<polygon>` per triangle; `y` points up in mesh space.
pub fn render_svg(g: &CpwlFunction, path: impl AsRef<Path>, opts: &SvgOptions) -> Result<()> {
    fs::write(path, svg_string(g, opts))?;
    Ok(())
}

pub(crate) fn svg_string(g: &CpwlFunction, opts: &SvgOptions) -> String {
    let mesh = g.mesh();
    let c = mesh.coords();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in c {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = opts.size / span;
    let (vmin, vmax) = g.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = opts.size
    );
    for tri in mesh.triangles() {
        let pts: Vec<String> = tri
            .iter()
            .map(|&v| format!("{:.3},{:.3}", (c[v][0] - lo[0]) * scale, (hi[1] - c[v][1]) * scale))
            .collect();
        let fill = if opts.fill_by_value && vmax > vmin {
            let mean = tri.iter().map(|&v| g.values()[v]).sum::<f64>() / 3.0;
            let t = (mean - vmin) / (vmax - vmin);
            let r = (255.0 * t) as u8;
            let b = (255.0 * (1.0 - t)) as u8;
            format!("rgb({r},96,{b})")
        } else {
            "none".to_string()
        };
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{fill}" stroke="black" stroke-width="{}"/>"#,
            pts.join(" "),
            opts.stroke_width
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::rat;

    fn pyramid_hat() -> CpwlFunction {
        let pts = vec![
            Point::from_ints(0, 0),
            Point::from_ints(1, 0),
            Point::from_ints(1, 1),
            Point::from_ints(0, 1),
            Point::new(rat(1, 2), rat(1, 2)),
        ];
        let mesh = Triangulation::new(pts, vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]).unwrap();
        CpwlFunction::new(Arc::new(mesh), vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let g = pyramid_hat().scaled(0.1 + 1.0 / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hat.json");
        save_mesh(&g, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn hanging_vertex_file_rejected() {
        let text = r#"{
            "vertices": [["0","1","0","1"],["2","1","0","1"],["2","1","2","1"],["0","1","2","1"],["1","1","1","1"]],
            "triangles": [[0,1,4],[1,2,4],[0,2,3]]
        }"#;
        assert!(matches!(mesh_from_json(text), Err(HtvError::Nonconforming(_))));
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(matches!(mesh_from_json("{"), Err(HtvError::MalformedFile(_))));
        let zero_den = r#"{"vertices": [["0","0","0","1"]], "triangles": []}"#;
        assert!(matches!(mesh_from_json(zero_den), Err(HtvError::MalformedFile(_))));
        let bad_value = r#"{"vertices": [["0","1","0","1"],["1","1","0","1"],["0","1","1","1"]],
            "triangles": [[0,1,2]], "values": ["x","0","0"]}"#;
        assert!(matches!(mesh_from_json(bad_value), Err(HtvError::MalformedFile(_))));
    }

    #[test]
    fn svg_has_one_polygon_per_triangle() {
        let g = pyramid_hat();
        let svg = svg_string(&g, &SvgOptions { fill_by_value: true, ..Default::default() });
        assert_eq!(svg.matches("<polygon").count(), 4);
        assert!(svg.starts_with("<svg"));
    }
}
