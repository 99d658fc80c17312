//! Metric-sensitivity benchmark: how IoU, GIoU and GeoShape respond when a
//! square box is translated against its own copy.

use crate::assign::{geoshape, giou, iou, Box, GeoShapeParams};
use crate::error::{Error, Result};

/// One (box side, shift) cell of the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: f64,
    pub shift: f64,
    pub iou: f64,
    pub giou: f64,
    pub psi: f64,
    /// Closed-form IoU `(k - d) / (k + d)`, present when the shift does not
    /// exceed the side length.
    pub analytic_iou: Option<f64>,
}

/// Scores a `k x k` box against its copy shifted by `d` along x, for every
/// pair from `sizes` x `shifts`.
pub fn assign_bench(sizes: &[f64], shifts: &[f64], params: &GeoShapeParams) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || shifts.is_empty() {
        return Err(Error::InvalidArgument(
            "sizes and shifts must be non-empty".into(),
        ));
    }
    for &k in sizes {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("bad box size {}", k)));
        }
    }
    for &d in shifts {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!("bad shift {}", d)));
        }
    }
    let mut rows = Vec::with_capacity(sizes.len() * shifts.len());
    for &k in sizes {
        let base = Box::new(0.0, 0.0, k, k)?;
        for &d in shifts {
            let shifted = Box::new(d, 0.0, k, k)?;
            rows.push(BenchRow {
                size: k,
                shift: d,
                iou: iou(&base, &shifted),
                giou: giou(&base, &shifted),
                psi: geoshape(&base, &shifted, params),
                analytic_iou: (d <= k).then(|| (k - d) / (k + d)),
            });
        }
    }
    Ok(rows)
}

/// Plain-text table of the benchmark rows.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:>8} {:>8} {:>12} {:>12} {:>12} {:>14}\n",
        "size", "shift", "iou", "giou", "psi", "analytic_iou"
    ));
    for r in rows {
        let analytic = r
            .analytic_iou
            .map(|v| format!("{:>14.9}", v))
            .unwrap_or_else(|| format!("{:>14}", "-"));
        s.push_str(&format!(
            "{:>8} {:>8} {:>12.9} {:>12.9} {:>12.9} {}\n",
            r.size, r.shift, r.iou, r.giou, r.psi, analytic
        ));
    }
    s
}

/// JSON array of the benchmark rows, floats with 12 significant digits.
pub fn format_json(rows: &[BenchRow]) -> String {
    let mut s = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        let analytic = r
            .analytic_iou
            .map(|v| format!("{:.11e}", v))
            .unwrap_or_else(|| "null".into());
        s.push_str(&format!(
            "  {{\"size\": {}, \"shift\": {}, \"iou\": {:.11e}, \"giou\": {:.11e}, \"psi\": {:.11e}, \"analytic_iou\": {}}}{}\n",
            r.size,
            r.shift,
            r.iou,
            r.giou,
            r.psi,
            analytic,
            if i + 1 < rows.len() { "," } else { "" }
        ));
    }
    s.push_str("]\n");
    s
}
