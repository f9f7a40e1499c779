//! CSV dumps of 2-D projections for plotting: the projected generators and
//! the corners of the projected enclosing zone.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{AnalysisResult, Network, Slot};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub generators: Vec<[f64; 2]>,
    /// Counter-clockwise, without repetition.
    pub zone_corners: Vec<[f64; 2]>,
}

pub fn project(res: &AnalysisResult, dims: (usize, usize)) -> Result<Projection> {
    let n = res.slots.len();
    for d in [dims.0, dims.1] {
        if d >= n {
            return Err(Error::BadIndex(d));
        }
    }
    let generators = res
        .internal
        .project(&[dims.0, dims.1], TOL)?
        .generators()
        .iter()
        .map(|g| [g[0], g[1]])
        .collect();
    let z = res.zone.project(&[dims.0, dims.1])?;
    Ok(Projection {
        generators,
        zone_corners: polygon(
            (z.lower(0), z.upper(0)),
            (z.lower(1), z.upper(1)),
            (-z.diff(1, 0), z.diff(0, 1)),
        ),
    })
}

/// Vertices of `{x ∈ xs, y ∈ ys, x − y ∈ ds}` (all bounds finite).
fn polygon(xs: (f64, f64), ys: (f64, f64), ds: (f64, f64)) -> Vec<[f64; 2]> {
    // lines a·x + b·y = c
    let lines: [(f64, f64, f64); 6] = [
        (1.0, 0.0, xs.0),
        (1.0, 0.0, xs.1),
        (0.0, 1.0, ys.0),
        (0.0, 1.0, ys.1),
        (1.0, -1.0, ds.0),
        (1.0, -1.0, ds.1),
    ];
    let inside = |x: f64, y: f64| {
        let t = TOL * (1.0 + x.abs() + y.abs());
        x >= xs.0 - t && x <= xs.1 + t && y >= ys.0 - t && y <= ys.1 + t && x - y >= ds.0 - t && x - y <= ds.1 + t
    };
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for (i, &(a1, b1, c1)) in lines.iter().enumerate() {
        for &(a2, b2, c2) in &lines[i + 1..] {
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (c1 * b2 - c2 * b1) / det;
            let y = (a1 * c2 - a2 * c1) / det;
            if inside(x, y) && !pts.iter().any(|p| (p[0] - x).abs() < 1e-9 && (p[1] - y).abs() < 1e-9) {
                pts.push([x, y]);
            }
        }
    }
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len().max(1) as f64;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len().max(1) as f64;
    pts.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.total_cmp(&aq)
    });
    pts
}

/// Header `kind,<label>,<label>`, then one `generator` row per projected
/// generator and one `zone` row per zone corner.
pub fn write_projection<W: Write>(mut w: W, net: &Network, res: &AnalysisResult, dims: (Slot, Slot)) -> Result<()> {
    let idx = |s: Slot| {
        res.slot_index(s)
            .ok_or_else(|| Error::VariableMismatch(format!("{} is not tracked", net.slot_label(s))))
    };
    let p = project(res, (idx(dims.0)?, idx(dims.1)?))?;
    writeln!(w, "kind,{},{}", net.slot_label(dims.0), net.slot_label(dims.1))?;
    for g in &p.generators {
        writeln!(w, "generator,{},{}", g[0] + 0.0, g[1] + 0.0)?;
    }
    for c in &p.zone_corners {
        writeln!(w, "zone,{},{}", c[0] + 0.0, c[1] + 0.0)?;
    }
    Ok(())
}

pub fn emit_projection_csv(net: &Network, res: &AnalysisResult, dims: (Slot, Slot), path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_projection(&mut w, net, res, dims)?;
    w.flush()?;
    Ok(())
}
