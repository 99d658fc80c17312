//! Orthonormal single-level 2D Haar transform and the cross-layer fusion
//! pipeline built on it.
//!
//! Per 2x2 block `[a b; c d]` the four coefficients are
//! `LL=(a+b+c+d)/2`, `LH=(a+b-c-d)/2`, `HL=(a-b+c-d)/2`, `HH=(a-b-c+d)/2`,
//! which makes the transform its own exact inverse up to the matching
//! reconstruction formulas and preserves energy.

use crate::error::{Error, Result};
use crate::tensor::{
    concat_channels, conv2d, deconv2d, elementwise, ConvParams, ElementwiseKind, FeatureMap,
};

/// The four sub-band maps of one decomposition level, each `(c, H/2, W/2)`.
#[derive(Debug, Clone)]
pub struct WaveletBands {
    pub ll: FeatureMap,
    pub lh: FeatureMap,
    pub hl: FeatureMap,
    pub hh: FeatureMap,
}

impl WaveletBands {
    fn check_shapes(&self) -> Result<()> {
        let s = self.ll.shape();
        for band in [&self.lh, &self.hl, &self.hh] {
            if band.shape() != s {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", s),
                    got: format!("{:?}", band.shape()),
                });
            }
        }
        Ok(())
    }
}

/// Single-level orthonormal Haar decomposition. Odd spatial dimensions are
/// rejected rather than padded so that reconstruction stays exact.
pub fn dwt_haar(input: &FeatureMap) -> Result<WaveletBands> {
    let (c, h, w) = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddDimension { h, w });
    }
    let (hh2, wh2) = (h / 2, w / 2);
    let mut ll = FeatureMap::zeros(c, hh2, wh2);
    let mut lh = FeatureMap::zeros(c, hh2, wh2);
    let mut hl = FeatureMap::zeros(c, hh2, wh2);
    let mut hh = FeatureMap::zeros(c, hh2, wh2);
    for ci in 0..c {
        for by in 0..hh2 {
            for bx in 0..wh2 {
                let a = input.get(ci, 2 * by, 2 * bx);
                let b = input.get(ci, 2 * by, 2 * bx + 1);
                let cc = input.get(ci, 2 * by + 1, 2 * bx);
                let d = input.get(ci, 2 * by + 1, 2 * bx + 1);
                ll.set(ci, by, bx, (a + b + cc + d) / 2.0);
                lh.set(ci, by, bx, (a + b - cc - d) / 2.0);
                hl.set(ci, by, bx, (a - b + cc - d) / 2.0);
                hh.set(ci, by, bx, (a - b - cc + d) / 2.0);
            }
        }
    }
    Ok(WaveletBands { ll, lh, hl, hh })
}

/// Exact inverse of [`dwt_haar`].
pub fn idwt_haar(bands: &WaveletBands) -> Result<FeatureMap> {
    bands.check_shapes()?;
    let (c, hh2, wh2) = bands.ll.shape();
    let mut out = FeatureMap::zeros(c, 2 * hh2, 2 * wh2);
    for ci in 0..c {
        for by in 0..hh2 {
            for bx in 0..wh2 {
                let ll = bands.ll.get(ci, by, bx);
                let lh = bands.lh.get(ci, by, bx);
                let hl = bands.hl.get(ci, by, bx);
                let hh = bands.hh.get(ci, by, bx);
                out.set(ci, 2 * by, 2 * bx, (ll + lh + hl + hh) / 2.0);
                out.set(ci, 2 * by, 2 * bx + 1, (ll + lh - hl - hh) / 2.0);
                out.set(ci, 2 * by + 1, 2 * bx, (ll - lh + hl - hh) / 2.0);
                out.set(ci, 2 * by + 1, 2 * bx + 1, (ll - lh - hl + hh) / 2.0);
            }
        }
    }
    Ok(out)
}

/// Learnable pieces of the cross-layer fusion pipeline.
///
/// `deconv` upsamples the next-stage visible map (2x2, stride 2),
/// `ll_fuse` merges the two LL bands (3x3, dilation 2, padding 2, 2C -> C),
/// and `hf_gate` maps the concatenated visible LH/HL details to a C-channel
/// gate (1x1, 2C -> C) so the gated product is dimensionally consistent.
#[derive(Debug, Clone)]
pub struct ClfmParams {
    pub deconv: ConvParams,
    pub ll_fuse: ConvParams,
    pub hf_gate: ConvParams,
}

/// Cross-layer fusion of a next-stage visible map `(C, H/2, W/2)` with a
/// thermal map `(C, H, W)`:
///
/// 1. upsample the visible map to `(C, H, W)` by transposed convolution;
/// 2. decompose both streams with the Haar DWT;
/// 3. fuse the two LL bands through `ll_fuse`;
/// 4. gate the fused LL with the visible detail bands:
///    `ll' = ll_fused * gate(concat(lh_v, hl_v)) + ll_fused`;
/// 5. reconstruct from `{ll', lh_v, hl_v, hh_v}`.
///
/// The thermal detail bands are discarded; only its LL context enters the
/// fusion.
pub fn clfm_fuse(
    f_v_next: &FeatureMap,
    f_t: &FeatureMap,
    params: &ClfmParams,
) -> Result<FeatureMap> {
    let (_, h, w) = f_t.shape();
    if f_v_next.height() * 2 != h || f_v_next.width() * 2 != w {
        return Err(Error::ShapeMismatch {
            expected: format!("visible spatial {}x{}", h / 2, w / 2),
            got: format!("{}x{}", f_v_next.height(), f_v_next.width()),
        });
    }
    let f_v_up = deconv2d(f_v_next, &params.deconv)?;
    let v_bands = dwt_haar(&f_v_up)?;
    let t_bands = dwt_haar(f_t)?;

    let ll_fused = conv2d(&concat_channels(&v_bands.ll, &t_bands.ll)?, &params.ll_fuse)?;
    let gate = conv2d(&concat_channels(&v_bands.lh, &v_bands.hl)?, &params.hf_gate)?;
    let gated = elementwise(&ll_fused, &gate, ElementwiseKind::Mul)?;
    let ll_out = elementwise(&gated, &ll_fused, ElementwiseKind::Add)?;

    idwt_haar(&WaveletBands {
        ll: ll_out,
        lh: v_bands.lh,
        hl: v_bands.hl,
        hh: v_bands.hh,
    })
}
