//! Minimal dense tensor kernels: convolution, activations, softmax,
//! normalization, and resampling over row-major `f64` arrays.
//!
//! Everything here is a pure function over immutable inputs; on finite
//! inputs every kernel produces finite outputs (norms and softmaxes are
//! eps-guarded and max-stabilized). 64-bit reals are used throughout so
//! gradient checks can resolve 1e-6 relative error.

use crate::error::{Error, Result};

/// Added to Euclidean norms before division so zero vectors normalize to zero.
pub const NORM_EPS: f64 = 1e-8;

/// Dense N-dimensional array of 64-bit reals in row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that `data.len()` equals the product of the extents
    /// and that every extent is positive.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&n| n == 0) {
            return Err(Error::invalid(
                "Tensor::new",
                format!("extents must be positive, got {shape:?}"),
            ));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} needs {expected} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; len] }
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len: usize = shape.iter().product();
        let mut index = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&index));
            for axis in (0..shape.len()).rev() {
                index[axis] += 1;
                if index[axis] < shape[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row-major strides for this shape.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    /// Linear offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for axis in (0..self.shape.len()).rev() {
            debug_assert!(index[axis] < self.shape[axis]);
            off += index[axis] * stride;
            stride *= self.shape[axis];
        }
        off
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "Tensor::add",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.iter().any(|&n| n == 0) || expected != self.data.len() {
            return Err(Error::shape(
                "Tensor::reshape",
                format!("cannot view {} elements as {shape:?}", self.data.len()),
            ));
        }
        self.shape = shape;
        Ok(self)
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for axis in (0..shape.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    strides
}

/// Elementwise map kinds exposed by [`pointwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    Sigmoid,
    Relu,
}

/// Numerically stable scalar logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise activation; shape preserved.
pub fn pointwise(kind: Pointwise, x: &Tensor) -> Tensor {
    match kind {
        Pointwise::Sigmoid => x.map(sigmoid),
        Pointwise::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
    }
}

/// Leaky rectifier with the given negative-side slope.
pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

/// Standard cross-correlation of a `C_in x H x W` input with a
/// `C_out x C_in x k x k` kernel and zero padding.
///
/// The kernel must be square with odd side, and `(H + 2*pad - k)` must be an
/// exact multiple of `stride` (same for width) so the output extent
/// `(H + 2*pad - k)/stride + 1` is well defined without implicit cropping.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    if input.rank() != 3 || weight.rank() != 4 || bias.rank() != 1 {
        return Err(Error::shape(
            "conv2d",
            format!(
                "expected input rank 3, weight rank 4, bias rank 1; got {:?}/{:?}/{:?}",
                input.shape(),
                weight.shape(),
                bias.shape()
            ),
        ));
    }
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, wc_in, kh, kw) =
        (weight.shape()[0], weight.shape()[1], weight.shape()[2], weight.shape()[3]);
    if wc_in != c_in {
        return Err(Error::shape(
            "conv2d",
            format!("weight expects {wc_in} input channels, input has {c_in}"),
        ));
    }
    if bias.shape()[0] != c_out {
        return Err(Error::shape(
            "conv2d",
            format!("bias has {} entries, weight produces {c_out} channels", bias.shape()[0]),
        ));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(Error::invalid(
            "conv2d",
            format!("kernel must be square with odd side, got {kh}x{kw}"),
        ));
    }
    if stride == 0 {
        return Err(Error::invalid("conv2d", "stride must be positive"));
    }
    let out_extent = |extent: usize, name: &str| -> Result<usize> {
        let span = extent + 2 * pad;
        if span < kh || (span - kh) % stride != 0 {
            return Err(Error::invalid(
                "conv2d",
                format!(
                    "{name}={extent} with pad={pad}, k={kh}, stride={stride} \
                     does not yield an integral output extent"
                ),
            ));
        }
        Ok((span - kh) / stride + 1)
    };
    let out_h = out_extent(h, "H")?;
    let out_w = out_extent(w, "W")?;

    let k = kh;
    let x = input.data();
    let wd = weight.data();
    let mut out = vec![0.0f64; c_out * out_h * out_w];
    for oc in 0..c_out {
        let w_oc = oc * c_in * k * k;
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = bias.data()[oc];
                for ic in 0..c_in {
                    let x_ic = ic * h * w;
                    let w_ic = w_oc + ic * k * k;
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let x_row = x_ic + iy as usize * w;
                        let w_row = w_ic + ky * k;
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += x[x_row + ix as usize] * wd[w_row + kx];
                        }
                    }
                }
                out[(oc * out_h + oy) * out_w + ox] = acc;
            }
        }
    }
    Tensor::new(vec![c_out, out_h, out_w], out)
}

/// Softmax over the selected axes, applied independently to every slice
/// spanned by the remaining axes. Max-subtraction keeps the exponentials
/// bounded, so each slice sums to 1 within rounding.
pub fn softmax_over(x: &Tensor, axes: &[usize]) -> Result<Tensor> {
    if axes.is_empty() {
        return Err(Error::invalid("softmax_over", "axis set must be non-empty"));
    }
    let rank = x.rank();
    let mut selected = vec![false; rank];
    for &axis in axes {
        if axis >= rank {
            return Err(Error::invalid(
                "softmax_over",
                format!("axis {axis} out of range for rank {rank}"),
            ));
        }
        if selected[axis] {
            return Err(Error::invalid("softmax_over", format!("axis {axis} repeated")));
        }
        selected[axis] = true;
    }
    let strides = x.strides();
    let mut inner: Vec<(usize, usize)> = Vec::new();
    let mut outer: Vec<(usize, usize)> = Vec::new();
    for axis in 0..rank {
        let dim = (x.shape()[axis], strides[axis]);
        if selected[axis] {
            inner.push(dim);
        } else {
            outer.push(dim);
        }
    }
    let inner_offsets = enumerate_offsets(&inner);
    let outer_offsets = enumerate_offsets(&outer);

    let src = x.data();
    let mut out = vec![0.0f64; src.len()];
    for &base in &outer_offsets {
        let mut max = f64::NEG_INFINITY;
        for &off in &inner_offsets {
            max = max.max(src[base + off]);
        }
        let mut sum = 0.0;
        for &off in &inner_offsets {
            let e = (src[base + off] - max).exp();
            out[base + off] = e;
            sum += e;
        }
        for &off in &inner_offsets {
            out[base + off] /= sum;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// All linear offsets spanned by (extent, stride) pairs, in row-major order.
fn enumerate_offsets(dims: &[(usize, usize)]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &(extent, stride) in dims {
        let mut next = Vec::with_capacity(offsets.len() * extent);
        for &base in &offsets {
            for i in 0..extent {
                next.push(base + i * stride);
            }
        }
        offsets = next;
    }
    offsets
}

/// Divides every spatial position's channel vector by its Euclidean norm
/// plus `eps`, so zero vectors map to zero instead of NaN.
pub fn l2_normalize_channels(f: &Tensor, eps: f64) -> Result<Tensor> {
    if f.rank() != 3 {
        return Err(Error::shape(
            "l2_normalize_channels",
            format!("expected D x H x W, got {:?}", f.shape()),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::invalid("l2_normalize_channels", "eps must be positive"));
    }
    let (d, h, w) = (f.shape()[0], f.shape()[1], f.shape()[2]);
    let plane = h * w;
    let src = f.data();
    let mut out = vec![0.0f64; src.len()];
    for pos in 0..plane {
        let mut sq = 0.0;
        for c in 0..d {
            let v = src[c * plane + pos];
            sq += v * v;
        }
        let inv = 1.0 / (sq.sqrt() + eps);
        for c in 0..d {
            out[c * plane + pos] = src[c * plane + pos] * inv;
        }
    }
    Tensor::new(f.shape().to_vec(), out)
}

/// Align-corners-false bilinear resampling of a `C x H x W` tensor.
/// Constant inputs map to constants and outputs stay inside [min, max]
/// of the input.
pub fn bilinear_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(Error::shape(
            "bilinear_resize",
            format!("expected C x H x W, got {:?}", x.shape()),
        ));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("bilinear_resize", "output extents must be >= 1"));
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let scale_y = h as f64 / out_h as f64;
    let scale_x = w as f64 / out_w as f64;
    // Source coordinate plus the two clamped sample indices and the blend weight.
    let axis_samples = |out_extent: usize, in_extent: usize, scale: f64| {
        (0..out_extent)
            .map(|o| {
                let src = (o as f64 + 0.5) * scale - 0.5;
                let floor = src.floor();
                let frac = src - floor;
                let i0 = (floor as isize).clamp(0, in_extent as isize - 1) as usize;
                let i1 = (floor as isize + 1).clamp(0, in_extent as isize - 1) as usize;
                (i0, i1, frac)
            })
            .collect::<Vec<_>>()
    };
    let ys = axis_samples(out_h, h, scale_y);
    let xs = axis_samples(out_w, w, scale_x);

    let src = x.data();
    let mut out = vec![0.0f64; c * out_h * out_w];
    for ch in 0..c {
        let base = ch * h * w;
        for (oy, &(y0, y1, wy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, wx)) in xs.iter().enumerate() {
                let top = src[base + y0 * w + x0] * (1.0 - wx) + src[base + y0 * w + x1] * wx;
                let bot = src[base + y1 * w + x0] * (1.0 - wx) + src[base + y1 * w + x1] * wx;
                out[(ch * out_h + oy) * out_w + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// Non-overlapping block averaging of a `C x H x W` tensor; both spatial
/// extents must be multiples of `block`.
pub fn avg_pool(x: &Tensor, block: usize) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(Error::shape("avg_pool", format!("expected C x H x W, got {:?}", x.shape())));
    }
    if block == 0 {
        return Err(Error::invalid("avg_pool", "block must be positive"));
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if h % block != 0 || w % block != 0 {
        return Err(Error::invalid(
            "avg_pool",
            format!("spatial extents {h}x{w} not divisible by block {block}"),
        ));
    }
    let (oh, ow) = (h / block, w / block);
    let inv = 1.0 / (block * block) as f64;
    let src = x.data();
    let mut out = vec![0.0f64; c * oh * ow];
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for by in 0..block {
                    let row = base + (oy * block + by) * w + ox * block;
                    for bx in 0..block {
                        acc += src[row + bx];
                    }
                }
                out[(ch * oh + oy) * ow + ox] = acc * inv;
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Stacks rank-3 tensors along the channel axis; spatial extents must agree.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::invalid("concat_channels", "need at least one tensor"));
    }
    let (h, w) = (parts[0].shape()[1], parts[0].shape()[2]);
    let mut channels = 0;
    for p in parts {
        if p.rank() != 3 || p.shape()[1] != h || p.shape()[2] != w {
            return Err(Error::shape(
                "concat_channels",
                format!("expected C x {h} x {w}, got {:?}", p.shape()),
            ));
        }
        channels += p.shape()[0];
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![channels, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(lo..hi)).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    /// Six-nested-loop convolution used as an independent oracle.
    fn conv2d_oracle(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (c_out, k) = (weight.shape()[0], weight.shape()[2]);
        let out_h = (h + 2 * pad - k) / stride + 1;
        let out_w = (w + 2 * pad - k) / stride + 1;
        let mut out = Tensor::zeros(&[c_out, out_h, out_w]);
        for oc in 0..c_out {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = bias.at(&[oc]);
                    for ic in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    acc += input.at(&[ic, iy as usize, ix as usize])
                                        * weight.at(&[oc, ic, ky, kx]);
                                }
                            }
                        }
                    }
                    out.set(&[oc, oy, ox], acc);
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn new_rejects_bad_lengths_and_extents() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn conv2d_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(&mut rng, &[2, 4, 5], -1.0, 1.0);
        let mut w = Tensor::zeros(&[2, 2, 1, 1]);
        w.set(&[0, 0, 0, 0], 1.0);
        w.set(&[1, 1, 0, 0], 1.0);
        let b = Tensor::zeros(&[2]);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv2d_box_kernel_counts_neighbors() {
        let x = Tensor::filled(&[1, 5, 5], 1.0);
        let w = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &w, &b, 1, 1).unwrap();
        assert_eq!(y.at(&[0, 2, 2]), 9.0);
        assert_eq!(y.at(&[0, 0, 0]), 4.0);
        assert_eq!(y.at(&[0, 0, 4]), 4.0);
        assert_eq!(y.at(&[0, 4, 0]), 4.0);
        assert_eq!(y.at(&[0, 0, 2]), 6.0);
    }

    #[test]
    fn conv2d_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(&mut rng, &[2, 5, 5], -1.0, 1.0);
        let w = rand_tensor(&mut rng, &[3, 2, 3, 3], -1.0, 1.0);
        let b = rand_tensor(&mut rng, &[3], -1.0, 1.0);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (1, 2)] {
            let span = 5 + 2 * pad - 3;
            if span % stride != 0 {
                continue;
            }
            let got = conv2d(&x, &w, &b, stride, pad).unwrap();
            let want = conv2d_oracle(&x, &w, &b, stride, pad);
            assert!(max_abs_diff(&got, &want) < 1e-12);
        }
    }

    #[test]
    fn conv2d_rejects_shape_mismatches() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let w = Tensor::zeros(&[3, 5, 3, 3]);
        let b = Tensor::zeros(&[3]);
        let err = conv2d(&x, &w, &b, 1, 1).unwrap_err();
        assert!(err.to_string().contains("input channels"));
        let w = Tensor::zeros(&[3, 2, 3, 3]);
        let b = Tensor::zeros(&[4]);
        assert!(conv2d(&x, &w, &b, 1, 1).is_err());
        // Even kernel and non-integral output extents are rejected.
        let w = Tensor::zeros(&[3, 2, 2, 2]);
        assert!(conv2d(&x, &w, &Tensor::zeros(&[3]), 1, 0).is_err());
        let w = Tensor::zeros(&[3, 2, 3, 3]);
        assert!(conv2d(&x, &w, &Tensor::zeros(&[3]), 2, 1).is_err());
    }

    #[test]
    fn conv2d_is_linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = rand_tensor(&mut rng, &[2, 4, 4], -1.0, 1.0);
            let y = rand_tensor(&mut rng, &[2, 4, 4], -1.0, 1.0);
            let w = rand_tensor(&mut rng, &[2, 2, 3, 3], -1.0, 1.0);
            let b = Tensor::zeros(&[2]);
            let (a, c) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mixed = x.scale(a).add(&y.scale(c)).unwrap();
            let lhs = conv2d(&mixed, &w, &b, 1, 1).unwrap();
            let rhs = conv2d(&x, &w, &b, 1, 1)
                .unwrap()
                .scale(a)
                .add(&conv2d(&y, &w, &b, 1, 1).unwrap().scale(c))
                .unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
        }
    }

    #[test]
    fn pointwise_anchor_values() {
        let x = Tensor::new(vec![3], vec![0.0, -3.0, 3.0]).unwrap();
        let s = pointwise(Pointwise::Sigmoid, &x);
        assert_eq!(s.data()[0], 0.5);
        let r = pointwise(Pointwise::Relu, &x);
        assert_eq!(r.data(), &[0.0, 0.0, 3.0]);
        let sat = pointwise(Pointwise::Sigmoid, &Tensor::filled(&[1], 50.0));
        assert!(1.0 - sat.data()[0] < 1e-20);
        assert!(sat.data()[0] < 1.0);
    }

    #[test]
    fn softmax_uniform_and_saturated() {
        let x = Tensor::filled(&[5, 5], 2.0);
        let s = softmax_over(&x, &[0, 1]).unwrap();
        for &v in s.data() {
            assert!((v - 1.0 / 25.0).abs() < 1e-15);
        }
        let mut x = Tensor::zeros(&[5, 5]);
        x.set(&[1, 3], 50.0);
        let s = softmax_over(&x, &[0, 1]).unwrap();
        assert!(s.at(&[1, 3]) > 1.0 - 1e-15);
    }

    #[test]
    fn softmax_matches_loop_oracle_and_rejects_empty_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_tensor(&mut rng, &[5, 5], -3.0, 3.0);
        let s = softmax_over(&x, &[0, 1]).unwrap();
        // Plain exp/sum oracle, no stabilization (safe at this range).
        let sum: f64 = x.data().iter().map(|v| v.exp()).sum();
        for (got, v) in s.data().iter().zip(x.data()) {
            assert!((got - v.exp() / sum).abs() < 1e-14);
        }
        assert!(softmax_over(&x, &[]).is_err());
        assert!(softmax_over(&x, &[2]).is_err());
        assert!(softmax_over(&x, &[0, 0]).is_err());
    }

    #[test]
    fn softmax_slices_sum_to_one_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&mut rng, &[3, 4, 5], -4.0, 4.0);
        let s = softmax_over(&x, &[1]).unwrap();
        for c in 0..3 {
            for col in 0..5 {
                let sum: f64 = (0..4).map(|r| s.at(&[c, r, col])).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        let shifted = x.map(|v| v + 7.25);
        let s2 = softmax_over(&shifted, &[1]).unwrap();
        for (a, b) in s.data().iter().zip(s2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_normalize_anchor_cases() {
        // Unit vector stays put up to the eps perturbation.
        let f = Tensor::new(vec![2, 1, 1], vec![0.6, 0.8]).unwrap();
        let n = l2_normalize_channels(&f, NORM_EPS).unwrap();
        assert!((n.data()[0] - 0.6).abs() < 1e-7);
        assert!((n.data()[1] - 0.8).abs() < 1e-7);
        // Zero vector maps to zero, not NaN.
        let z = l2_normalize_channels(&Tensor::zeros(&[3, 2, 2]), NORM_EPS).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        // Random vectors come out unit-norm within 1e-6.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = rand_tensor(&mut rng, &[4, 3, 3], -2.0, 2.0);
        let n = l2_normalize_channels(&f, NORM_EPS).unwrap();
        for pos in 0..9 {
            let norm: f64 = (0..4).map(|c| n.data()[c * 9 + pos].powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn l2_normalize_direction_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = rand_tensor(&mut rng, &[5, 2, 2], 0.2, 2.0);
            let c = rng.gen_range(0.1..10.0);
            let a = l2_normalize_channels(&f, NORM_EPS).unwrap();
            let b = l2_normalize_channels(&f.scale(c), NORM_EPS).unwrap();
            for pos in 0..4 {
                let dot: f64 = (0..5).map(|ch| a.data()[ch * 4 + pos] * b.data()[ch * 4 + pos]).sum();
                let na: f64 = (0..5).map(|ch| a.data()[ch * 4 + pos].powi(2)).sum::<f64>().sqrt();
                let nb: f64 = (0..5).map(|ch| b.data()[ch * 4 + pos].powi(2)).sum::<f64>().sqrt();
                assert!(dot / (na * nb) > 1.0 - 1e-9);
            }
        }
    }

    /// Direct evaluation of align-corners-false interpolation, written
    /// independently of `bilinear_resize`.
    fn bilinear_oracle(x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        Tensor::from_fn(&[c, out_h, out_w], |idx| {
            let sy = (idx[1] as f64 + 0.5) * h as f64 / out_h as f64 - 0.5;
            let sx = (idx[2] as f64 + 0.5) * w as f64 / out_w as f64 - 0.5;
            let sample = |yy: f64, xx: f64| {
                let y = (yy.round() as isize).clamp(0, h as isize - 1) as usize;
                let xc = (xx.round() as isize).clamp(0, w as isize - 1) as usize;
                x.at(&[idx[0], y, xc])
            };
            let (y0, x0) = (sy.floor(), sx.floor());
            let (fy, fx) = (sy - y0, sx - x0);
            sample(y0, x0) * (1.0 - fy) * (1.0 - fx)
                + sample(y0, x0 + 1.0) * (1.0 - fy) * fx
                + sample(y0 + 1.0, x0) * fy * (1.0 - fx)
                + sample(y0 + 1.0, x0 + 1.0) * fy * fx
        })
    }

    #[test]
    fn bilinear_constant_and_broadcast() {
        let x = Tensor::filled(&[2, 3, 3], 7.0);
        let y = bilinear_resize(&x, 5, 8).unwrap();
        assert!(y.data().iter().all(|&v| (v - 7.0).abs() < 1e-12));
        let one = Tensor::new(vec![1, 1, 1], vec![4.25]).unwrap();
        let y = bilinear_resize(&one, 3, 4).unwrap();
        assert!(y.data().iter().all(|&v| v == 4.25));
    }

    #[test]
    fn bilinear_2x2_to_4x4_matches_closed_form() {
        let x = Tensor::new(vec![1, 2, 2], vec![0.0, 1.0, 0.0, 2.0]).unwrap();
        let y = bilinear_resize(&x, 4, 4).unwrap();
        let want = bilinear_oracle(&x, 4, 4);
        assert!(max_abs_diff(&y, &want) < 1e-12);
        // Hand-computed row 1: 0.75*row0 + 0.25*row1 after horizontal blends.
        assert!((y.at(&[0, 1, 1]) - 0.3125).abs() < 1e-12);
        assert!((y.at(&[0, 2, 2]) - 1.3125).abs() < 1e-12);
    }

    #[test]
    fn bilinear_respects_min_max_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let x = rand_tensor(&mut rng, &[2, 4, 6], -5.0, 5.0);
            let y = bilinear_resize(&x, 9, 5).unwrap();
            assert!(y.min_value() >= x.min_value() - 1e-12);
            assert!(y.max_value() <= x.max_value() + 1e-12);
        }
    }

    #[test]
    fn avg_pool_blocks() {
        let x = Tensor::from_fn(&[1, 4, 4], |idx| (idx[1] * 4 + idx[2]) as f64);
        let y = avg_pool(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.at(&[0, 0, 0]), (0.0 + 1.0 + 4.0 + 5.0) / 4.0);
        assert!(avg_pool(&x, 3).is_err());
    }

    #[test]
    fn concat_channels_stacks() {
        let a = Tensor::filled(&[2, 2, 2], 1.0);
        let b = Tensor::filled(&[1, 2, 2], 2.0);
        let c = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[3, 2, 2]);
        assert_eq!(c.at(&[2, 1, 1]), 2.0);
        let bad = Tensor::filled(&[1, 3, 2], 0.0);
        assert!(concat_channels(&[&a, &bad]).is_err());
    }
}
