//! Minimal dense-tensor substrate: feature-map storage, the convolution
//! family, pooling, softmax and elementwise algebra.
//!
//! Layout is `(c, y, x)` row-major in double precision. Batching, autodiff
//! and im2col-style optimizations are deliberately out of scope; every
//! operation is a pure function over immutable inputs.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Dense `(channels, height, width)` map of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    /// Builds a map from row-major `(c, y, x)` data, validating length and
    /// finiteness.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature map dimensions must be positive, got {}x{}x{}",
                channels, height, width
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature map data"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Fills a map by evaluating `f(c, y, x)` at every cell.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape()),
                got: format!("{:?}", other.shape()),
            });
        }
        Ok(())
    }

    /// Writes the map as an FMAP container: magic `"FMAP"`, then `c`, `h`,
    /// `w` as little-endian u32, then `c*h*w` little-endian f64 values.
    pub fn write_fmap<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"FMAP")?;
        w.write_all(&(self.channels as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a map written by [`FeatureMap::write_fmap`].
    pub fn read_fmap<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"FMAP" {
            return Err(Error::BadFormat(format!("bad magic {:?}", magic)));
        }
        let mut u = [0u8; 4];
        r.read_exact(&mut u)?;
        let c = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let h = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let w = u32::from_le_bytes(u) as usize;
        let n = c
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| Error::BadFormat("header dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        FeatureMap::new(c, h, w, data)
    }
}

/// Parameters of a 2D (de)convolution: weights shaped
/// `(c_out, c_in, k_h, k_w)`, one bias per output channel, and the usual
/// stride / dilation / zero-padding triple.
#[derive(Debug, Clone)]
pub struct ConvParams {
    c_out: usize,
    c_in: usize,
    k_h: usize,
    k_w: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(
        c_out: usize,
        c_in: usize,
        k_h: usize,
        k_w: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        stride: usize,
        dilation: usize,
        padding: usize,
    ) -> Result<Self> {
        if c_out == 0 || c_in == 0 || k_h == 0 || k_w == 0 {
            return Err(Error::InvalidArgument(
                "kernel dimensions must be positive".into(),
            ));
        }
        if stride == 0 || dilation == 0 {
            return Err(Error::InvalidArgument(
                "stride and dilation must be positive".into(),
            ));
        }
        if weights.len() != c_out * c_in * k_h * k_w {
            return Err(Error::InvalidArgument(format!(
                "weight length {} does not match ({},{},{},{})",
                weights.len(),
                c_out,
                c_in,
                k_h,
                k_w
            )));
        }
        if bias.len() != c_out {
            return Err(Error::InvalidArgument(format!(
                "bias length {} does not match c_out {}",
                bias.len(),
                c_out
            )));
        }
        if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("conv parameters"));
        }
        Ok(Self {
            c_out,
            c_in,
            k_h,
            k_w,
            weights,
            bias,
            stride,
            dilation,
            padding,
        })
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.k_h, self.k_w)
    }

    #[inline]
    pub fn weight(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((co * self.c_in + ci) * self.k_h + ky) * self.k_w + kx]
    }

    pub fn bias(&self, co: usize) -> f64 {
        self.bias[co]
    }
}

/// Standard cross-correlation with zero padding.
///
/// Output extent is `floor((H + 2p - d*(k-1) - 1) / s) + 1` per axis; an
/// extent below one is rejected.
pub fn conv2d(input: &FeatureMap, params: &ConvParams) -> Result<FeatureMap> {
    if params.c_in != input.channels() {
        return Err(Error::ChannelMismatch {
            expected: params.c_in,
            got: input.channels(),
        });
    }
    let (h, w) = (input.height() as i64, input.width() as i64);
    let (k_h, k_w) = (params.k_h as i64, params.k_w as i64);
    let (s, d, p) = (
        params.stride as i64,
        params.dilation as i64,
        params.padding as i64,
    );
    let out_h = (h + 2 * p - d * (k_h - 1) - 1).div_euclid(s) + 1;
    let out_w = (w + 2 * p - d * (k_w - 1) - 1).div_euclid(s) + 1;
    if out_h < 1 || out_w < 1 {
        return Err(Error::EmptyOutput { h: out_h, w: out_w });
    }

    let mut out = FeatureMap::zeros(params.c_out, out_h as usize, out_w as usize);
    for co in 0..params.c_out {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = params.bias(co);
                for ci in 0..params.c_in {
                    for ky in 0..params.k_h {
                        for kx in 0..params.k_w {
                            let iy = oy * s + d * ky as i64 - p;
                            let ix = ox * s + d * kx as i64 - p;
                            if iy < 0 || iy >= h || ix < 0 || ix >= w {
                                continue; // zero padding
                            }
                            acc += params.weight(co, ci, ky, kx)
                                * input.get(ci, iy as usize, ix as usize);
                        }
                    }
                }
                out.set(co, oy as usize, ox as usize, acc);
            }
        }
    }
    Ok(out)
}

/// Transposed convolution, fixed to kernel 2x2 and stride 2 so the output is
/// exactly `2H x 2W` with non-overlapping blocks.
pub fn deconv2d(input: &FeatureMap, params: &ConvParams) -> Result<FeatureMap> {
    if params.c_in != input.channels() {
        return Err(Error::ChannelMismatch {
            expected: params.c_in,
            got: input.channels(),
        });
    }
    if params.kernel() != (2, 2) || params.stride != 2 {
        return Err(Error::InvalidArgument(
            "deconv2d requires a 2x2 kernel with stride 2".into(),
        ));
    }
    let (h, w) = (input.height(), input.width());
    let mut out = FeatureMap::zeros(params.c_out, 2 * h, 2 * w);
    for co in 0..params.c_out {
        for v in 0..2 * h {
            for u in 0..2 * w {
                out.set(co, v, u, params.bias(co));
            }
        }
        for ci in 0..input.channels() {
            for y in 0..h {
                for x in 0..w {
                    let v = input.get(ci, y, x);
                    for ky in 0..2 {
                        for kx in 0..2 {
                            let oy = 2 * y + ky;
                            let ox = 2 * x + kx;
                            let prev = out.get(co, oy, ox);
                            out.set(co, oy, ox, prev + params.weight(co, ci, ky, kx) * v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel spatial mean.
pub fn global_avg_pool(input: &FeatureMap) -> Vec<f64> {
    let n = (input.height() * input.width()) as f64;
    (0..input.channels())
        .map(|c| {
            let mut sum = 0.0;
            for y in 0..input.height() {
                for x in 0..input.width() {
                    sum += input.get(c, y, x);
                }
            }
            sum / n
        })
        .collect()
}

/// Softmax across channels at every pixel, stabilized by max-subtraction.
pub fn channel_softmax(input: &FeatureMap) -> FeatureMap {
    let (c, h, w) = input.shape();
    let mut out = FeatureMap::zeros(c, h, w);
    for y in 0..h {
        for x in 0..w {
            let max = (0..c)
                .map(|ci| input.get(ci, y, x))
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for ci in 0..c {
                let e = (input.get(ci, y, x) - max).exp();
                out.set(ci, y, x, e);
                sum += e;
            }
            for ci in 0..c {
                let v = out.get(ci, y, x) / sum;
                out.set(ci, y, x, v);
            }
        }
    }
    out
}

/// Pointwise binary operation kind for [`elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Mul,
}

/// Pointwise addition or multiplication of two same-shaped maps.
pub fn elementwise(a: &FeatureMap, b: &FeatureMap, kind: ElementwiseKind) -> Result<FeatureMap> {
    a.same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| match kind {
            ElementwiseKind::Add => x + y,
            ElementwiseKind::Mul => x * y,
        })
        .collect();
    Ok(FeatureMap {
        channels: a.channels,
        height: a.height,
        width: a.width,
        data,
    })
}

/// Stacks `a`'s channels before `b`'s; spatial dims must match.
pub fn concat_channels(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::ShapeMismatch {
            expected: format!("spatial {}x{}", a.height(), a.width()),
            got: format!("spatial {}x{}", b.height(), b.width()),
        });
    }
    let mut data = Vec::with_capacity((a.channels + b.channels) * a.height * a.width);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok(FeatureMap {
        channels: a.channels + b.channels,
        height: a.height,
        width: a.width,
        data,
    })
}

/// `alpha * a + beta * b` over same-shaped maps.
pub fn lincomb(alpha: f64, a: &FeatureMap, beta: f64, b: &FeatureMap) -> Result<FeatureMap> {
    a.same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    Ok(FeatureMap {
        channels: a.channels,
        height: a.height,
        width: a.width,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-2.0..2.0))
    }

    fn random_conv(
        rng: &mut ChaCha8Rng,
        c_out: usize,
        c_in: usize,
        k: usize,
        stride: usize,
        dilation: usize,
        padding: usize,
    ) -> ConvParams {
        let weights = (0..c_out * c_in * k * k)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let bias = (0..c_out).map(|_| rng.gen_range(-0.5..0.5)).collect();
        ConvParams::new(c_out, c_in, k, k, weights, bias, stride, dilation, padding).unwrap()
    }

    /// Direct nested-loop cross-correlation, kept independent of `conv2d`.
    fn conv2d_oracle(input: &FeatureMap, p: &ConvParams) -> FeatureMap {
        let (k_h, k_w) = p.kernel();
        let out_h =
            (input.height() + 2 * p.padding - p.dilation * (k_h - 1) - 1) / p.stride + 1;
        let out_w =
            (input.width() + 2 * p.padding - p.dilation * (k_w - 1) - 1) / p.stride + 1;
        FeatureMap::from_fn(p.c_out(), out_h, out_w, |co, oy, ox| {
            let mut acc = p.bias(co);
            for ci in 0..p.c_in() {
                for ky in 0..k_h {
                    for kx in 0..k_w {
                        let iy = (oy * p.stride + p.dilation * ky) as i64 - p.padding as i64;
                        let ix = (ox * p.stride + p.dilation * kx) as i64 - p.padding as i64;
                        if iy >= 0
                            && (iy as usize) < input.height()
                            && ix >= 0
                            && (ix as usize) < input.width()
                        {
                            acc += p.weight(co, ci, ky, kx)
                                * input.get(ci, iy as usize, ix as usize);
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_map(&mut rng, 3, 5, 6);
        let mut weights = vec![0.0; 3 * 3];
        for c in 0..3 {
            weights[c * 3 + c] = 1.0;
        }
        let p = ConvParams::new(3, 3, 1, 1, weights, vec![0.0; 3], 1, 1, 0).unwrap();
        let out = conv2d(&input, &p).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_box_kernel_on_constant() {
        let input = FeatureMap::from_fn(1, 6, 6, |_, _, _| 1.5);
        let p = ConvParams::new(1, 1, 3, 3, vec![1.0; 9], vec![0.0], 1, 1, 1).unwrap();
        let out = conv2d(&input, &p).unwrap();
        // interior pixels sum all nine neighbours
        for y in 1..5 {
            for x in 1..5 {
                assert!((out.get(0, y, x) - 13.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_matches_oracle_dilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_map(&mut rng, 2, 5, 7);
        let p = random_conv(&mut rng, 3, 2, 3, 1, 2, 2);
        let out = conv2d(&input, &p).unwrap();
        let expect = conv2d_oracle(&input, &p);
        assert_eq!(out.shape(), expect.shape());
        for (a, b) in out.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_exact_on_integer_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = FeatureMap::from_fn(2, 6, 6, |_, _, _| rng.gen_range(-5..6) as f64);
        let weights = (0..2 * 2 * 9).map(|_| rng.gen_range(-3..4) as f64).collect();
        let p = ConvParams::new(2, 2, 3, 3, weights, vec![0.0, 0.0], 1, 1, 1).unwrap();
        let out = conv2d(&input, &p).unwrap();
        let expect = conv2d_oracle(&input, &p);
        assert_eq!(out.data(), expect.data());
    }

    #[test]
    fn conv_rejects_channel_mismatch_and_empty_output() {
        let input = FeatureMap::zeros(2, 4, 4);
        let p = ConvParams::new(1, 3, 3, 3, vec![0.0; 27], vec![0.0], 1, 1, 0).unwrap();
        assert!(matches!(
            conv2d(&input, &p),
            Err(Error::ChannelMismatch { .. })
        ));
        let p = ConvParams::new(1, 2, 7, 7, vec![0.0; 2 * 49], vec![0.0], 1, 1, 0).unwrap();
        assert!(matches!(conv2d(&input, &p), Err(Error::EmptyOutput { .. })));
    }

    #[test]
    fn deconv_constant_blocks() {
        let input = FeatureMap::from_fn(1, 3, 3, |_, _, _| 2.5);
        let p = ConvParams::new(1, 1, 2, 2, vec![1.0; 4], vec![0.0], 2, 1, 0).unwrap();
        let out = deconv2d(&input, &p).unwrap();
        assert_eq!(out.shape(), (1, 6, 6));
        assert!(out.data().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn deconv_zero_weights() {
        let input = FeatureMap::from_fn(2, 3, 4, |c, y, x| (c + y + x) as f64);
        let p = ConvParams::new(3, 2, 2, 2, vec![0.0; 3 * 2 * 4], vec![0.0; 3], 2, 1, 0).unwrap();
        let out = deconv2d(&input, &p).unwrap();
        assert_eq!(out.shape(), (3, 6, 8));
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn deconv_matches_scatter_add_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let input = random_map(&mut rng, 1, 3, 3);
        let p = random_conv(&mut rng, 1, 1, 2, 2, 1, 0);
        let out = deconv2d(&input, &p).unwrap();
        // scatter-add oracle
        let mut expect = vec![vec![p.bias(0); 6]; 6];
        for y in 0..3 {
            for x in 0..3 {
                for ky in 0..2 {
                    for kx in 0..2 {
                        expect[2 * y + ky][2 * x + kx] += p.weight(0, 0, ky, kx) * input.get(0, y, x);
                    }
                }
            }
        }
        for y in 0..6 {
            for x in 0..6 {
                assert!((out.get(0, y, x) - expect[y][x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_and_deconv_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let x = random_map(&mut rng, 2, 4, 4);
            let y = random_map(&mut rng, 2, 4, 4);
            let alpha = rng.gen_range(-2.0..2.0);
            let beta = rng.gen_range(-2.0..2.0);
            let mix = lincomb(alpha, &x, beta, &y).unwrap();

            let mut p = random_conv(&mut rng, 2, 2, 3, 1, 1, 1);
            p.bias = vec![0.0; 2];
            let lhs = conv2d(&mix, &p).unwrap();
            let rhs = lincomb(alpha, &conv2d(&x, &p).unwrap(), beta, &conv2d(&y, &p).unwrap())
                .unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                assert!((a - b).abs() < 1e-10);
            }

            let mut d = random_conv(&mut rng, 2, 2, 2, 2, 1, 0);
            d.bias = vec![0.0; 2];
            let lhs = deconv2d(&mix, &d).unwrap();
            let rhs = lincomb(
                alpha,
                &deconv2d(&x, &d).unwrap(),
                beta,
                &deconv2d(&y, &d).unwrap(),
            )
            .unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gap_values() {
        let constant = FeatureMap::from_fn(3, 4, 4, |_, _, _| -0.75);
        assert!(global_avg_pool(&constant)
            .iter()
            .all(|v| (v + 0.75).abs() < 1e-15));

        let quad = FeatureMap::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((global_avg_pool(&quad)[0] - 2.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_map(&mut rng, 2, 7, 5);
        let means = global_avg_pool(&m);
        for c in 0..2 {
            let mut sum = 0.0;
            for y in 0..7 {
                for x in 0..5 {
                    sum += m.get(c, y, x);
                }
            }
            let expect = sum / 35.0;
            assert!((means[c] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn softmax_uniform_closed_form_and_shift_invariance() {
        let equal = FeatureMap::from_fn(4, 2, 2, |_, _, _| 3.7);
        let s = channel_softmax(&equal);
        assert!(s.data().iter().all(|v| (v - 0.25).abs() < 1e-15));

        let two = FeatureMap::new(2, 1, 1, vec![0.0, 3.0_f64.ln()]).unwrap();
        let s = channel_softmax(&two);
        assert!((s.get(0, 0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(1, 0, 0) - 0.75).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_map(&mut rng, 3, 3, 3);
        let shifted = FeatureMap::from_fn(3, 3, 3, |c, y, x| m.get(c, y, x) + 17.25);
        let a = channel_softmax(&m);
        let b = channel_softmax(&shifted);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        // sums to one at every pixel
        for y in 0..3 {
            for x in 0..3 {
                let sum: f64 = (0..3).map(|c| a.get(c, y, x)).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn elementwise_identities_and_concat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_map(&mut rng, 2, 4, 4);
        let zero = FeatureMap::zeros(2, 4, 4);
        let ones = FeatureMap::from_fn(2, 4, 4, |_, _, _| 1.0);
        assert_eq!(elementwise(&a, &zero, ElementwiseKind::Add).unwrap(), a);
        assert_eq!(elementwise(&a, &ones, ElementwiseKind::Mul).unwrap(), a);

        let b = random_map(&mut rng, 3, 4, 4);
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), (5, 4, 4));
        for c in 0..2 {
            assert_eq!(cat.get(c, 1, 2), a.get(c, 1, 2));
        }
        for c in 0..3 {
            assert_eq!(cat.get(2 + c, 3, 0), b.get(c, 3, 0));
        }

        let small = FeatureMap::zeros(2, 3, 4);
        assert!(elementwise(&a, &small, ElementwiseKind::Add).is_err());
        assert!(concat_channels(&a, &small).is_err());
    }

    #[test]
    fn fmap_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_map(&mut rng, 3, 5, 4);
        let mut buf = Vec::new();
        m.write_fmap(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 12 + 3 * 5 * 4 * 8);
        let back = FeatureMap::read_fmap(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn fmap_rejects_bad_magic() {
        let buf = b"XMAP\x01\x00\x00\x00\x01\x00\x00\x00\x01\x00\x00\x00".to_vec();
        assert!(FeatureMap::read_fmap(buf.as_slice()).is_err());
    }
}
