//! Offset-based cross-modal alignment (offset prediction plus bilinear grid
//! sampling) and gated multi-dilation scale refinement.

use crate::error::{Error, Result};
use crate::tensor::{concat_channels, conv2d, global_avg_pool, ConvParams, FeatureMap};

/// Per-pixel displacement field in pixel units; both components are bounded
/// strictly by `max_disp` via the tanh in [`predict_offsets`].
#[derive(Debug, Clone)]
pub struct OffsetField {
    pub dx: FeatureMap,
    pub dy: FeatureMap,
    pub max_disp: f64,
}

impl OffsetField {
    /// Constant displacement over an `h x w` grid.
    pub fn constant(h: usize, w: usize, dx: f64, dy: f64) -> Self {
        let max_disp = dx.abs().max(dy.abs()).max(1.0);
        Self {
            dx: FeatureMap::from_fn(1, h, w, |_, _, _| dx),
            dy: FeatureMap::from_fn(1, h, w, |_, _, _| dy),
            max_disp,
        }
    }
}

/// Predicts a bounded (dx, dy) field from the channel concatenation of the
/// two modalities.
///
/// The raw 2-channel conv output is standardized per channel over the
/// spatial extent (eps 1e-6 under the square root), squashed through tanh
/// and scaled by `max_disp`.
pub fn predict_offsets(
    f_v: &FeatureMap,
    f_t: &FeatureMap,
    conv: &ConvParams,
    max_disp: f64,
) -> Result<OffsetField> {
    if f_v.shape() != f_t.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", f_v.shape()),
            got: format!("{:?}", f_t.shape()),
        });
    }
    if max_disp <= 0.0 {
        return Err(Error::InvalidArgument("max_disp must be positive".into()));
    }
    let raw = conv2d(&concat_channels(f_v, f_t)?, conv)?;
    if raw.channels() != 2 {
        return Err(Error::ChannelMismatch {
            expected: 2,
            got: raw.channels(),
        });
    }
    if raw.height() != f_v.height() || raw.width() != f_v.width() {
        return Err(Error::ShapeMismatch {
            expected: format!("spatial {}x{}", f_v.height(), f_v.width()),
            got: format!("spatial {}x{}", raw.height(), raw.width()),
        });
    }
    let (h, w) = (raw.height(), raw.width());
    let n = (h * w) as f64;
    let mut planes = Vec::with_capacity(2);
    for c in 0..2 {
        let mean: f64 = (0..h)
            .flat_map(|y| (0..w).map(move |x| (y, x)))
            .map(|(y, x)| raw.get(c, y, x))
            .sum::<f64>()
            / n;
        let var: f64 = (0..h)
            .flat_map(|y| (0..w).map(move |x| (y, x)))
            .map(|(y, x)| {
                let d = raw.get(c, y, x) - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let inv = 1.0 / (var + 1e-6).sqrt();
        planes.push(FeatureMap::from_fn(1, h, w, |_, y, x| {
            ((raw.get(c, y, x) - mean) * inv).tanh() * max_disp
        }));
    }
    let dy = planes.pop().expect("two planes");
    let dx = planes.pop().expect("two planes");
    Ok(OffsetField { dx, dy, max_disp })
}

fn bilinear(input: &FeatureMap, c: usize, x: f64, y: f64) -> f64 {
    let (h, w) = (input.height(), input.width());
    // replicate-clamp border handling
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let v00 = input.get(c, y0, x0);
    let v01 = input.get(c, y0, x1);
    let v10 = input.get(c, y1, x0);
    let v11 = input.get(c, y1, x1);
    v00 * (1.0 - fx) * (1.0 - fy) + v01 * fx * (1.0 - fy) + v10 * (1.0 - fx) * fy + v11 * fx * fy
}

/// Samples every channel of `input` at `(x + dx, y + dy)` with bilinear
/// interpolation; coordinates outside the grid clamp to the border.
pub fn grid_sample(input: &FeatureMap, offsets: &OffsetField) -> Result<FeatureMap> {
    let (h, w) = (input.height(), input.width());
    if offsets.dx.shape() != (1, h, w) || offsets.dy.shape() != (1, h, w) {
        return Err(Error::ShapeMismatch {
            expected: format!("(1, {}, {})", h, w),
            got: format!("{:?} / {:?}", offsets.dx.shape(), offsets.dy.shape()),
        });
    }
    Ok(FeatureMap::from_fn(input.channels(), h, w, |c, y, x| {
        let sx = x as f64 + offsets.dx.get(0, y, x);
        let sy = y as f64 + offsets.dy.get(0, y, x);
        bilinear(input, c, sx, sy)
    }))
}

/// Aligns the visible stream to the thermal reference: predicts offsets from
/// the pair, warps the visible map, and passes the thermal map through
/// unchanged.
pub fn aam_align(
    f_v: &FeatureMap,
    f_t: &FeatureMap,
    conv: &ConvParams,
    max_disp: f64,
) -> Result<(FeatureMap, FeatureMap)> {
    let offsets = predict_offsets(f_v, f_t, conv, max_disp)?;
    Ok((grid_sample(f_v, &offsets)?, f_t.clone()))
}

/// Parameters of the gated multi-dilation refinement: one 3x3 branch per
/// dilation (padding equal to the dilation keeps shapes intact), a 1x1
/// projection producing the branch logits from the pooled context, and a 1x1
/// context projection added back as a per-channel broadcast.
#[derive(Debug, Clone)]
pub struct DsrParams {
    pub branches: Vec<ConvParams>,
    pub gate_proj: ConvParams,
    pub context_proj: ConvParams,
}

/// Softmax over a logit vector.
fn softmax_vec(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Applies a 1x1 conv to a pooled channel vector treated as a `(C, 1, 1)`
/// map, returning the output channel vector.
fn project_vector(vector: &[f64], proj: &ConvParams) -> Result<Vec<f64>> {
    let as_map = FeatureMap::new(vector.len(), 1, 1, vector.to_vec())?;
    let out = conv2d(&as_map, proj)?;
    Ok(out.data().to_vec())
}

/// Scale refinement: convex combination of the dilation branches, weighted
/// by a softmax gate derived from the pooled input, plus a broadcast context
/// term. Shape is preserved.
pub fn dsr_refine(input: &FeatureMap, params: &DsrParams) -> Result<FeatureMap> {
    if params.branches.is_empty() {
        return Err(Error::InvalidArgument("at least one branch required".into()));
    }
    let pooled = global_avg_pool(input);
    let logits = project_vector(&pooled, &params.gate_proj)?;
    if logits.len() != params.branches.len() {
        return Err(Error::ChannelMismatch {
            expected: params.branches.len(),
            got: logits.len(),
        });
    }
    let weights = softmax_vec(&logits);
    let context = project_vector(&pooled, &params.context_proj)?;

    let (c, h, w) = input.shape();
    let mut out = FeatureMap::zeros(c, h, w);
    for (branch, &weight) in params.branches.iter().zip(&weights) {
        let b = conv2d(input, branch)?;
        if b.shape() != input.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", input.shape()),
                got: format!("{:?}", b.shape()),
            });
        }
        for (o, v) in out.data_mut().iter_mut().zip(b.data()) {
            *o += weight * v;
        }
    }
    if context.len() != c {
        return Err(Error::ChannelMismatch {
            expected: c,
            got: context.len(),
        });
    }
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                let v = out.get(ci, y, x) + context[ci];
                out.set(ci, y, x, v);
            }
        }
    }
    Ok(out)
}
