//! A tiny differentiable encoder-decoder ("micro U-Net") with hand-written
//! forward and backward passes, plus its Adam optimizer and checkpoint io.
//!
//! Pipeline (input dims must be even; one pooling stage):
//!
//! ```text
//! conv 3x3 (1 -> 8, pad 1) + ReLU
//!   -> maxpool 2x2
//!   -> conv 3x3 (8 -> 16, pad 1) + ReLU
//!   -> bilinear upsample x2
//!   -> channel concat with the pre-pool activations (8 + 16 = 24)
//!   -> conv 3x3 (24 -> 8, pad 1) + ReLU
//!   -> conv 1x1 (8 -> 1) -> sigmoid
//! ```
//!
//! 2993 parameters total, small enough that the full backward pass is
//! finite-difference checked coordinate by coordinate. Everything is double
//! precision, and all reductions run in a fixed order, so a seed determines
//! results bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::losses::ProbMask;
use crate::rng::SplitMix64;

/// Total number of trainable parameters (80 + 1168 + 1736 + 9).
pub const PARAM_COUNT: usize = 2993;

/// One convolution layer's weights, `[out][in][k][k]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv {
    fn zeros(out_ch: usize, in_ch: usize, kernel: usize) -> Self {
        Conv {
            out_ch,
            in_ch,
            kernel,
            weights: vec![0.0; out_ch * in_ch * kernel * kernel],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// All weights of the network. The flat-vector view (`flatten`) orders
/// parameters conv1 weights, conv1 bias, conv2 weights, ... conv4 bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterParams {
    pub conv1: Conv,
    pub conv2: Conv,
    pub conv3: Conv,
    pub conv4: Conv,
}

impl SegmenterParams {
    pub fn zeros() -> Self {
        SegmenterParams {
            conv1: Conv::zeros(8, 1, 3),
            conv2: Conv::zeros(16, 8, 3),
            conv3: Conv::zeros(8, 24, 3),
            conv4: Conv::zeros(1, 8, 1),
        }
    }

    fn layers(&self) -> [&Conv; 4] {
        [&self.conv1, &self.conv2, &self.conv3, &self.conv4]
    }

    fn layers_mut(&mut self) -> [&mut Conv; 4] {
        [
            &mut self.conv1,
            &mut self.conv2,
            &mut self.conv3,
            &mut self.conv4,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(PARAM_COUNT);
        for layer in self.layers() {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    pub fn unflatten(flat: &[f64]) -> Result<Self> {
        if flat.len() != PARAM_COUNT {
            return Err(Error::dims(format!(
                "flat parameter vector has length {}, expected {PARAM_COUNT}",
                flat.len()
            )));
        }
        let mut params = SegmenterParams::zeros();
        let mut offset = 0;
        for layer in params.layers_mut() {
            let wlen = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + wlen]);
            offset += wlen;
            let blen = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + blen]);
            offset += blen;
        }
        Ok(params)
    }

    /// Apply `f(index, param)` to every parameter in flat order.
    pub fn update_in_place(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for layer in self.layers_mut() {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                f(idx, w);
                idx += 1;
            }
        }
    }
}

/// He-style initialization: weights drawn from `N(0, 2 / fan_in)` with the
/// crate's SplitMix64 generator, biases zero. Same seed, same parameters.
pub fn init_params(seed: u64) -> SegmenterParams {
    let mut rng = SplitMix64::new(seed);
    let mut params = SegmenterParams::zeros();
    for layer in params.layers_mut() {
        let fan_in = layer.in_ch * layer.kernel * layer.kernel;
        let std = (2.0 / fan_in as f64).sqrt();
        for w in layer.weights.iter_mut() {
            *w = rng.normal(0.0, std);
        }
    }
    params
}

/// Channel-major activation buffer: index `(c * h + y) * w + x`.
#[derive(Debug, Clone)]
struct Tensor {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    #[inline]
    fn plane(&self, c: usize) -> &[f64] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    #[inline]
    fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let sz = self.h * self.w;
        &mut self.data[c * sz..(c + 1) * sz]
    }
}

/// Everything backward needs from one sample's forward pass. The first 8
/// channels of `concat` are the pre-pool activations, so they are not
/// cached twice.
#[derive(Debug, Clone)]
struct SampleCache {
    input: Tensor,
    z1: Tensor,
    /// For each pooled cell, the flat index into the `a1` buffer that won.
    pool_argmax: Vec<usize>,
    p1: Tensor,
    z2: Tensor,
    concat: Tensor,
    z3: Tensor,
    a3: Tensor,
    out: Vec<f64>,
}

/// Forward activations for a batch, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    samples: Vec<SampleCache>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.samples.len()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    // Clamp keeps the output strictly inside (0, 1) even for huge logits.
    let z = z.clamp(-34.0, 34.0);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Zero-padded convolution; padding is `kernel / 2` so spatial dims are
/// preserved for the 3x3 and 1x1 kernels used here.
fn conv_forward(x: &Tensor, conv: &Conv) -> Tensor {
    debug_assert_eq!(x.c, conv.in_ch);
    let (h, w) = (x.h, x.w);
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(conv.out_ch, h, w);
    for o in 0..conv.out_ch {
        out.plane_mut(o).fill(conv.bias[o]);
        for i in 0..conv.in_ch {
            let xin = x.plane(i);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let wgt = conv.weights[((o * conv.in_ch + i) * k + ky) * k + kx];
                    let y_lo = (-dy).max(0) as usize;
                    let y_hi = (h as isize - dy).min(h as isize) as usize;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as isize - dx).min(w as isize) as usize;
                    let oplane = out.plane_mut(o);
                    for y in y_lo..y_hi {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let dst_row = y * w;
                        for x in x_lo..x_hi {
                            oplane[dst_row + x] +=
                                wgt * xin[src_row + (x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a convolution: accumulates into `dw`/`db` and returns the
/// input gradient.
fn conv_backward(
    x: &Tensor,
    conv: &Conv,
    dout: &Tensor,
    dw: &mut [f64],
    db: &mut [f64],
) -> Tensor {
    let (h, w) = (x.h, x.w);
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let mut dx = Tensor::zeros(conv.in_ch, h, w);
    for o in 0..conv.out_ch {
        let dplane = dout.plane(o);
        db[o] += dplane.iter().sum::<f64>();
        for i in 0..conv.in_ch {
            let xin = x.plane(i);
            let dxin = dx.plane_mut(i);
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx_off = kx as isize - pad;
                    let widx = ((o * conv.in_ch + i) * k + ky) * k + kx;
                    let wgt = conv.weights[widx];
                    let y_lo = (-dy).max(0) as usize;
                    let y_hi = (h as isize - dy).min(h as isize) as usize;
                    let x_lo = (-dx_off).max(0) as usize;
                    let x_hi = (w as isize - dx_off).min(w as isize) as usize;
                    let mut wgrad = 0.0;
                    for y in y_lo..y_hi {
                        let src_row = ((y as isize + dy) as usize) * w;
                        let dst_row = y * w;
                        for x in x_lo..x_hi {
                            let g = dplane[dst_row + x];
                            let xi = (x as isize + dx_off) as usize;
                            wgrad += g * xin[src_row + xi];
                            dxin[src_row + xi] += wgt * g;
                        }
                    }
                    dw[widx] += wgrad;
                }
            }
        }
    }
    dx
}

fn relu_forward(z: &Tensor) -> Tensor {
    Tensor {
        c: z.c,
        h: z.h,
        w: z.w,
        data: z.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Gate `da` by the sign of the pre-activation.
fn relu_backward(z: &Tensor, da: &mut Tensor) {
    for (g, &zv) in da.data.iter_mut().zip(&z.data) {
        if zv <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2x2 max pooling with stride 2; ties go to the first cell in scan order.
fn maxpool_forward(a: &Tensor) -> (Tensor, Vec<usize>) {
    let (h2, w2) = (a.h / 2, a.w / 2);
    let mut out = Tensor::zeros(a.c, h2, w2);
    let mut argmax = Vec::with_capacity(a.c * h2 * w2);
    for c in 0..a.c {
        for y in 0..h2 {
            for x in 0..w2 {
                let mut best_idx = (c * a.h + 2 * y) * a.w + 2 * x;
                let mut best = a.data[best_idx];
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = (c * a.h + 2 * y + dy) * a.w + 2 * x + dx;
                        if a.data[idx] > best {
                            best = a.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.data[(c * h2 + y) * w2 + x] = best;
                argmax.push(best_idx);
            }
        }
    }
    (out, argmax)
}

/// Per-axis (low index, high index, fraction) tables for the x2 bilinear
/// upsample with half-pixel centers.
fn upsample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

fn upsample_forward(a: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let ys = upsample_axis(a.h, out_h);
    let xs = upsample_axis(a.w, out_w);
    let mut out = Tensor::zeros(a.c, out_h, out_w);
    for c in 0..a.c {
        let src = a.plane(c);
        let dst = out.plane_mut(c);
        for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = src[y0 * a.w + x0] * (1.0 - fx) + src[y0 * a.w + x1] * fx;
                let bot = src[y1 * a.w + x0] * (1.0 - fx) + src[y1 * a.w + x1] * fx;
                dst[y * out_w + x] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    out
}

/// Transpose of the interpolation operator: scatter each output gradient
/// back to its source corners with the same weights.
fn upsample_backward(dout: &Tensor, src_h: usize, src_w: usize) -> Tensor {
    let ys = upsample_axis(src_h, dout.h);
    let xs = upsample_axis(src_w, dout.w);
    let mut dsrc = Tensor::zeros(dout.c, src_h, src_w);
    for c in 0..dout.c {
        let dplane = dout.plane(c);
        let splane = dsrc.plane_mut(c);
        for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
                let g = dplane[y * dout.w + x];
                splane[y0 * src_w + x0] += g * (1.0 - fy) * (1.0 - fx);
                splane[y0 * src_w + x1] += g * (1.0 - fy) * fx;
                splane[y1 * src_w + x0] += g * fy * (1.0 - fx);
                splane[y1 * src_w + x1] += g * fy * fx;
            }
        }
    }
    dsrc
}

fn forward_sample(params: &SegmenterParams, img: &GrayImage) -> Result<SampleCache> {
    if img.width % 2 != 0 || img.height % 2 != 0 {
        return Err(Error::invalid(format!(
            "input dims {}x{} must be even (one pooling stage)",
            img.width, img.height
        )));
    }
    let (h, w) = (img.height, img.width);
    let mut input = Tensor::zeros(1, h, w);
    for (dst, &v) in input.data.iter_mut().zip(&img.data) {
        *dst = v as f64 / 255.0;
    }

    let z1 = conv_forward(&input, &params.conv1);
    let a1 = relu_forward(&z1);
    let (p1, pool_argmax) = maxpool_forward(&a1);
    let z2 = conv_forward(&p1, &params.conv2);
    let a2 = relu_forward(&z2);
    let up = upsample_forward(&a2, h, w);

    let mut concat = Tensor::zeros(24, h, w);
    concat.data[..8 * h * w].copy_from_slice(&a1.data);
    concat.data[8 * h * w..].copy_from_slice(&up.data);

    let z3 = conv_forward(&concat, &params.conv3);
    let a3 = relu_forward(&z3);
    let z4 = conv_forward(&a3, &params.conv4);
    let out: Vec<f64> = z4.data.iter().map(|&z| sigmoid(z)).collect();

    Ok(SampleCache {
        input,
        z1,
        pool_argmax,
        p1,
        z2,
        concat,
        z3,
        a3,
        out,
    })
}

/// Run the network on a batch of grayscale images (normalized to [0,1]
/// internally). Returns per-sample probability maps plus the cache needed
/// for [`backward`].
pub fn forward(
    params: &SegmenterParams,
    batch: &[GrayImage],
) -> Result<(Vec<ProbMask>, ForwardCache)> {
    let mut probs = Vec::with_capacity(batch.len());
    let mut samples = Vec::with_capacity(batch.len());
    for img in batch {
        let cache = forward_sample(params, img)?;
        probs.push(ProbMask {
            width: img.width,
            height: img.height,
            data: cache.out.clone(),
        });
        samples.push(cache);
    }
    Ok((probs, ForwardCache { samples }))
}

/// Flat gradient accumulator mirroring the parameter layout.
struct GradAccum {
    conv1_w: Vec<f64>,
    conv1_b: Vec<f64>,
    conv2_w: Vec<f64>,
    conv2_b: Vec<f64>,
    conv3_w: Vec<f64>,
    conv3_b: Vec<f64>,
    conv4_w: Vec<f64>,
    conv4_b: Vec<f64>,
}

impl GradAccum {
    fn zeros(p: &SegmenterParams) -> Self {
        GradAccum {
            conv1_w: vec![0.0; p.conv1.weights.len()],
            conv1_b: vec![0.0; p.conv1.bias.len()],
            conv2_w: vec![0.0; p.conv2.weights.len()],
            conv2_b: vec![0.0; p.conv2.bias.len()],
            conv3_w: vec![0.0; p.conv3.weights.len()],
            conv3_b: vec![0.0; p.conv3.bias.len()],
            conv4_w: vec![0.0; p.conv4.weights.len()],
            conv4_b: vec![0.0; p.conv4.bias.len()],
        }
    }

    fn into_flat(self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(PARAM_COUNT);
        for part in [
            self.conv1_w,
            self.conv1_b,
            self.conv2_w,
            self.conv2_b,
            self.conv3_w,
            self.conv3_b,
            self.conv4_w,
            self.conv4_b,
        ] {
            flat.extend(part);
        }
        flat
    }
}

/// Exact gradient of the batch loss w.r.t. every parameter, where
/// `loss_grads[s]` is d(per-sample loss)/d(probability) for sample `s` and
/// the batch loss is the mean of the per-sample losses. The sigmoid
/// derivative is composed internally.
pub fn backward(
    params: &SegmenterParams,
    cache: &ForwardCache,
    loss_grads: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if loss_grads.len() != cache.samples.len() {
        return Err(Error::dims(format!(
            "{} gradient buffers for {} cached samples",
            loss_grads.len(),
            cache.samples.len()
        )));
    }
    let mut acc = GradAccum::zeros(params);
    for (sample, dl_dp) in cache.samples.iter().zip(loss_grads) {
        if dl_dp.len() != sample.out.len() {
            return Err(Error::dims(format!(
                "loss gradient length {} vs output length {}",
                dl_dp.len(),
                sample.out.len()
            )));
        }
        backward_sample(params, sample, dl_dp, &mut acc);
    }
    let scale = 1.0 / cache.samples.len().max(1) as f64;
    let mut flat = acc.into_flat();
    for g in &mut flat {
        *g *= scale;
    }
    Ok(flat)
}

fn backward_sample(
    params: &SegmenterParams,
    s: &SampleCache,
    dl_dp: &[f64],
    acc: &mut GradAccum,
) {
    let (h, w) = (s.input.h, s.input.w);

    // Sigmoid head.
    let mut dz4 = Tensor::zeros(1, h, w);
    for ((g, &p), &dl) in dz4.data.iter_mut().zip(&s.out).zip(dl_dp) {
        *g = dl * p * (1.0 - p);
    }

    let mut da3 = conv_backward(&s.a3, &params.conv4, &dz4, &mut acc.conv4_w, &mut acc.conv4_b);
    relu_backward(&s.z3, &mut da3);
    let dconcat = conv_backward(
        &s.concat,
        &params.conv3,
        &da3,
        &mut acc.conv3_w,
        &mut acc.conv3_b,
    );

    // Split the concat gradient into the skip branch and the decoder branch.
    let mut da1 = Tensor::zeros(8, h, w);
    da1.data.copy_from_slice(&dconcat.data[..8 * h * w]);
    let mut dup = Tensor::zeros(16, h, w);
    dup.data.copy_from_slice(&dconcat.data[8 * h * w..]);

    let mut da2 = upsample_backward(&dup, h / 2, w / 2);
    relu_backward(&s.z2, &mut da2);
    let dp1 = conv_backward(&s.p1, &params.conv2, &da2, &mut acc.conv2_w, &mut acc.conv2_b);

    // Max pool routes gradient to the stored argmax.
    for (cell, &src_idx) in s.pool_argmax.iter().enumerate() {
        da1.data[src_idx] += dp1.data[cell];
    }

    relu_backward(&s.z1, &mut da1);
    conv_backward(&s.input, &params.conv1, &da1, &mut acc.conv1_w, &mut acc.conv1_b);
}

/// Adam optimizer state over the flat parameter view.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(lr: f64) -> Self {
        OptimizerState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: vec![0.0; PARAM_COUNT],
            second_moment: vec![0.0; PARAM_COUNT],
        }
    }

    /// One Adam update with bias correction.
    pub fn apply(&mut self, params: &mut SegmenterParams, grad: &[f64]) -> Result<()> {
        if grad.len() != PARAM_COUNT {
            return Err(Error::dims(format!(
                "gradient length {}, expected {PARAM_COUNT}",
                grad.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (m, v) = (&mut self.first_moment, &mut self.second_moment);
        let (beta1, beta2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        params.update_in_place(|i, p| {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
        Ok(())
    }
}

// Checkpoint format (little-endian):
//   magic   8 bytes  "SSEGNET1"
//   version u32      1
//   layers  u32      4, then per layer: out_ch u32, in_ch u32, kernel u32
//   count   u64      total parameter count
//   params  count x f64, flat order (conv1 w, conv1 b, ..., conv4 b)

const CHECKPOINT_MAGIC: &[u8; 8] = b"SSEGNET1";
const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, params: &SegmenterParams) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(CHECKPOINT_MAGIC)?;
    f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    f.write_all(&(4u32).to_le_bytes())?;
    for layer in params.layers() {
        f.write_all(&(layer.out_ch as u32).to_le_bytes())?;
        f.write_all(&(layer.in_ch as u32).to_le_bytes())?;
        f.write_all(&(layer.kernel as u32).to_le_bytes())?;
    }
    let flat = params.flatten();
    f.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in flat {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SegmenterParams> {
    let mut f = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    let fail = |msg: &str| Error::format(path, msg);

    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        if pos + n > bytes.len() {
            return Err(fail("truncated checkpoint"));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };

    if take(8)? != CHECKPOINT_MAGIC {
        return Err(fail("bad magic; not a segmenter checkpoint"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(fail(&format!("unsupported checkpoint version {version}")));
    }
    let layer_count = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if layer_count != 4 {
        return Err(fail(&format!("expected 4 layers, found {layer_count}")));
    }
    let reference = SegmenterParams::zeros();
    for layer in reference.layers() {
        let out_ch = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let in_ch = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let kernel = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if (out_ch, in_ch, kernel) != (layer.out_ch, layer.in_ch, layer.kernel) {
            return Err(fail(&format!(
                "layer shape {out_ch}x{in_ch}x{kernel} does not match this architecture"
            )));
        }
    }
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    if count != PARAM_COUNT {
        return Err(fail(&format!("parameter count {count} != {PARAM_COUNT}")));
    }
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        flat.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    SegmenterParams::unflatten(&flat)
}
