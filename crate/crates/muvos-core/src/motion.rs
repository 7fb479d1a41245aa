//! Implicit motion estimation between adjacent feature maps.
//!
//! A correlation cost volume holds the cosine similarity between every
//! position of the current feature map and a window of candidate targets in
//! the previous one. Displacement is regressed from the volume by a
//! soft-argmin (expectation of offsets under a softmax over matching
//! scores), and the per-position maximum score doubles as a matching
//! confidence map. The three channels together form the motion input for
//! the downstream motion network.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layers::ConvLayer;
use crate::tensor::{Tensor, NORM_EPS};

/// Score recorded for candidate targets that fall outside the image:
/// the minimum cosine, so they are maximally implausible matches and the
/// per-position maximum stays well defined.
pub const OUT_OF_BOUNDS_SCORE: f64 = -1.0;

/// 4-D correlation volume over a `U x V` displacement window.
///
/// `values` is laid out `[U, V, H, W]`: index `iu` spans horizontal offsets
/// `u = iu - (U-1)/2` (columns), index `iv` spans vertical offsets
/// `v = iv - (V-1)/2` (rows), and the entry at `(iu, iv, y, x)` scores the
/// match between the current frame at `(x, y)` and the previous frame at
/// `(x+u, y+v)`. Volumes produced by [`build_cost_volume`] have every entry
/// in `[-1 - 1e-9, 1 + 1e-9]`; [`CostVolume::from_values`] does not enforce
/// that bound so synthetic volumes can be constructed in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    window_u: usize,
    window_v: usize,
    values: Tensor,
}

impl CostVolume {
    /// Wraps a `U x V x H x W` tensor; both window extents must be odd.
    pub fn from_values(values: Tensor) -> Result<Self> {
        if values.rank() != 4 {
            return Err(Error::shape(
                "CostVolume::from_values",
                format!("expected U x V x H x W, got {:?}", values.shape()),
            ));
        }
        let (u, v) = (values.shape()[0], values.shape()[1]);
        if u % 2 == 0 || v % 2 == 0 {
            return Err(Error::invalid(
                "CostVolume::from_values",
                format!("window extents must be odd, got {u}x{v}"),
            ));
        }
        Ok(CostVolume { window_u: u, window_v: v, values })
    }

    pub fn window(&self) -> (usize, usize) {
        (self.window_u, self.window_v)
    }

    /// Half-widths of the window: offsets run in `[-radius, radius]`.
    pub fn radius(&self) -> (i64, i64) {
        ((self.window_u as i64 - 1) / 2, (self.window_v as i64 - 1) / 2)
    }

    pub fn height(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[3]
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }
}

/// Displacement field, confidence map, and the assembled 3-channel motion
/// input they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionBundle {
    /// `2 x H x W`; channel 0 is horizontal, channel 1 vertical, in
    /// feature-grid pixels.
    pub displacement: Tensor,
    /// `1 x H x W`; per-position best matching score in `[-1, 1]`.
    pub uncertainty: Tensor,
    /// `3 x H x W`; displacement normalized by the window radii plus the
    /// confidence channel.
    pub motion_input: Tensor,
}

/// 1x1 projection that reduces a `D`-channel feature map to `D/4` channels
/// before correlation. `D` must be divisible by 4.
pub fn project_features(f: &Tensor, proj: &ConvLayer) -> Result<Tensor> {
    if f.rank() != 3 {
        return Err(Error::shape(
            "project_features",
            format!("expected D x H x W, got {:?}", f.shape()),
        ));
    }
    let d = f.shape()[0];
    if d % 4 != 0 {
        return Err(Error::invalid(
            "project_features",
            format!("feature dimension {d} not divisible by 4"),
        ));
    }
    if proj.kernel() != 1 || proj.in_channels() != d || proj.out_channels() != d / 4 {
        return Err(Error::shape(
            "project_features",
            format!(
                "projection must be 1x1 {d}->{}'; got {:?}",
                d / 4,
                proj.weight.shape()
            ),
        ));
    }
    proj.forward(f, 1, 0)
}

/// Correlates two same-shape `d x H x W` feature maps over a `U x V`
/// search window of integer displacements.
///
/// Each entry is the cosine similarity with eps-guarded denominators,
/// `dot / ((|a| + eps)(|b| + eps))`, so zero-texture positions produce 0
/// rather than NaN. Offsets whose target lands outside the image record
/// [`OUT_OF_BOUNDS_SCORE`].
///
/// This is the hot loop of the crate: per-position norms are precomputed
/// and the `U*V` offset planes are filled in parallel, each plane being an
/// independent contiguous slab.
pub fn build_cost_volume(
    f_t: &Tensor,
    f_prev: &Tensor,
    window: (usize, usize),
) -> Result<CostVolume> {
    if f_t.rank() != 3 || f_t.shape() != f_prev.shape() {
        return Err(Error::shape(
            "build_cost_volume",
            format!("features must share a d x H x W shape, got {:?} vs {:?}", f_t.shape(), f_prev.shape()),
        ));
    }
    let (win_u, win_v) = window;
    if win_u % 2 == 0 || win_v % 2 == 0 || win_u == 0 || win_v == 0 {
        return Err(Error::invalid(
            "build_cost_volume",
            format!("window extents must be odd and positive, got {win_u}x{win_v}"),
        ));
    }
    let (d, h, w) = (f_t.shape()[0], f_t.shape()[1], f_t.shape()[2]);
    let plane = h * w;
    let norms = |f: &Tensor| -> Vec<f64> {
        let src = f.data();
        (0..plane)
            .map(|pos| {
                let mut sq = 0.0;
                for c in 0..d {
                    let v = src[c * plane + pos];
                    sq += v * v;
                }
                sq.sqrt() + NORM_EPS
            })
            .collect()
    };
    let norm_t = norms(f_t);
    let norm_prev = norms(f_prev);

    let ru = (win_u as i64 - 1) / 2;
    let rv = (win_v as i64 - 1) / 2;
    let cur = f_t.data();
    let prev = f_prev.data();

    let mut values = vec![0.0f64; win_u * win_v * plane];
    values
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(slab, out)| {
            let du = (slab / win_v) as i64 - ru;
            let dv = (slab % win_v) as i64 - rv;
            for y in 0..h as i64 {
                let ty = y + dv;
                for x in 0..w as i64 {
                    let tx = x + du;
                    let pos = (y * w as i64 + x) as usize;
                    out[pos] = if ty < 0 || ty >= h as i64 || tx < 0 || tx >= w as i64 {
                        OUT_OF_BOUNDS_SCORE
                    } else {
                        let tpos = (ty * w as i64 + tx) as usize;
                        let mut dot = 0.0;
                        for c in 0..d {
                            dot += cur[c * plane + pos] * prev[c * plane + tpos];
                        }
                        dot / (norm_t[pos] * norm_prev[tpos])
                    };
                }
            }
        });
    CostVolume::from_values(Tensor::new(vec![win_u, win_v, h, w], values)?)
}

/// Per-position softmax probabilities over the displacement window,
/// reused by the soft-argmin forward and backward passes.
fn window_softmax(c: &CostVolume, sign: f64, pos: usize, plane: usize, probs: &mut [f64]) {
    let vals = c.values.data();
    let slabs = probs.len();
    let mut max = f64::NEG_INFINITY;
    for slab in 0..slabs {
        max = max.max(sign * vals[slab * plane + pos]);
    }
    let mut sum = 0.0;
    for slab in 0..slabs {
        let e = (sign * vals[slab * plane + pos] - max).exp();
        probs[slab] = e;
        sum += e;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// Soft-argmin displacement regression: per position,
/// `u_hat = sum_u u * softmax(sign * C(u, x))`.
///
/// With `sign = +1` (the default throughout the crate) the softmax mass
/// sits on high-similarity offsets; `sign = -1` applies the softmax to the
/// negated scores instead. The output is `2 x H x W` with channel 0
/// horizontal and channel 1 vertical, each bounded by the window radii
/// (it is a convex combination of offsets).
pub fn soft_argmin_displacement(c: &CostVolume, sign: f64) -> Tensor {
    let (h, w) = (c.height(), c.width());
    let (win_u, win_v) = c.window();
    let (ru, rv) = c.radius();
    let plane = h * w;
    let slabs = win_u * win_v;
    let mut out = vec![0.0f64; 2 * plane];
    let mut probs = vec![0.0f64; slabs];
    for pos in 0..plane {
        window_softmax(c, sign, pos, plane, &mut probs);
        let mut mean_u = 0.0;
        let mut mean_v = 0.0;
        for (slab, &p) in probs.iter().enumerate() {
            let du = (slab / win_v) as i64 - ru;
            let dv = (slab % win_v) as i64 - rv;
            mean_u += p * du as f64;
            mean_v += p * dv as f64;
        }
        out[pos] = mean_u;
        out[plane + pos] = mean_v;
    }
    Tensor::new(vec![2, h, w], out).unwrap()
}

/// Analytic Jacobian of the soft-argmin, contracted with an upstream
/// `2 x H x W` gradient: at each position,
/// `d u_hat_c / d C(u) = sign * p_u * (u_c - u_hat_c)`.
pub fn soft_argmin_grad(c: &CostVolume, sign: f64, upstream: &Tensor) -> Result<Tensor> {
    let (h, w) = (c.height(), c.width());
    if upstream.shape() != [2, h, w] {
        return Err(Error::shape(
            "soft_argmin_grad",
            format!("upstream must be 2 x {h} x {w}, got {:?}", upstream.shape()),
        ));
    }
    let (win_u, win_v) = c.window();
    let (ru, rv) = c.radius();
    let plane = h * w;
    let slabs = win_u * win_v;
    let up = upstream.data();
    let mut grad = vec![0.0f64; slabs * plane];
    let mut probs = vec![0.0f64; slabs];
    for pos in 0..plane {
        window_softmax(c, sign, pos, plane, &mut probs);
        let mut mean_u = 0.0;
        let mut mean_v = 0.0;
        for (slab, &p) in probs.iter().enumerate() {
            let du = (slab / win_v) as i64 - ru;
            let dv = (slab % win_v) as i64 - rv;
            mean_u += p * du as f64;
            mean_v += p * dv as f64;
        }
        let (g_u, g_v) = (up[pos], up[plane + pos]);
        for (slab, &p) in probs.iter().enumerate() {
            let du = (slab / win_v) as i64 - ru;
            let dv = (slab % win_v) as i64 - rv;
            grad[slab * plane + pos] =
                sign * p * ((du as f64 - mean_u) * g_u + (dv as f64 - mean_v) * g_v);
        }
    }
    Tensor::new(vec![win_u, win_v, h, w], grad)
}

/// Per-position maximum matching score over the window, `1 x H x W`.
///
/// Larger values mean more confident matches; the convention follows the
/// displacement branch, where moving well-textured regions light up.
pub fn uncertainty_map(c: &CostVolume) -> Tensor {
    let (h, w) = (c.height(), c.width());
    let plane = h * w;
    let slabs = c.window_u * c.window_v;
    let vals = c.values.data();
    let mut out = vec![f64::NEG_INFINITY; plane];
    for slab in 0..slabs {
        let base = slab * plane;
        for pos in 0..plane {
            let v = vals[base + pos];
            if v > out[pos] {
                out[pos] = v;
            }
        }
    }
    Tensor::new(vec![1, h, w], out).unwrap()
}

/// Stacks the motion channels fed to the motion network: displacement
/// components divided by their window radii (so they live in `[-1, 1]`)
/// followed by the confidence map.
pub fn assemble_motion_input(
    disp: &Tensor,
    unc: &Tensor,
    window: (usize, usize),
) -> Result<Tensor> {
    if disp.rank() != 3 || disp.shape()[0] != 2 {
        return Err(Error::shape(
            "assemble_motion_input",
            format!("displacement must be 2 x H x W, got {:?}", disp.shape()),
        ));
    }
    let (h, w) = (disp.shape()[1], disp.shape()[2]);
    if unc.shape() != [1, h, w] {
        return Err(Error::shape(
            "assemble_motion_input",
            format!("uncertainty must be 1 x {h} x {w}, got {:?}", unc.shape()),
        ));
    }
    if window.0 % 2 == 0 || window.1 % 2 == 0 {
        return Err(Error::invalid(
            "assemble_motion_input",
            format!("window extents must be odd, got {}x{}", window.0, window.1),
        ));
    }
    let ru = (window.0 - 1) / 2;
    let rv = (window.1 - 1) / 2;
    let norm = |radius: usize, v: f64| if radius == 0 { 0.0 } else { v / radius as f64 };
    let plane = h * w;
    let mut data = Vec::with_capacity(3 * plane);
    data.extend(disp.data()[..plane].iter().map(|&v| norm(ru, v)));
    data.extend(disp.data()[plane..].iter().map(|&v| norm(rv, v)));
    data.extend_from_slice(unc.data());
    Tensor::new(vec![3, h, w], data)
}

/// Runs the full chain on a pair of (already projected) feature maps.
pub fn motion_bundle(
    f_t: &Tensor,
    f_prev: &Tensor,
    window: (usize, usize),
    sign: f64,
) -> Result<MotionBundle> {
    let volume = build_cost_volume(f_t, f_prev, window)?;
    let displacement = soft_argmin_displacement(&volume, sign);
    let uncertainty = uncertainty_map(&volume);
    let motion_input = assemble_motion_input(&displacement, &uncertainty, window)?;
    Ok(MotionBundle { displacement, uncertainty, motion_input })
}
