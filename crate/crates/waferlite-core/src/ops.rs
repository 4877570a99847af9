//! Layer primitives: forward and backward rules.
//!
//! All functions are pure; backward rules take whatever the forward pass
//! saved and return gradients of the same shapes as their inputs. The
//! conv/dense inner loops are arranged so the stride-1 case reduces to
//! contiguous slice multiply-accumulates, which is what keeps the larger
//! benchmark models tractable on a single core.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Activation kinds used by the model zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Relu,
    Relu6,
}

/// Valid output index range `lo..hi` such that `0 <= o*stride + off < len`.
#[inline]
fn valid_range(out_len: usize, stride: usize, off: isize, len: usize) -> (usize, usize) {
    let lo = if off >= 0 {
        0
    } else {
        let need = (-off) as usize;
        need.div_ceil(stride)
    };
    let top = len as isize - 1 - off;
    if top < 0 {
        return (0, 0);
    }
    let hi = (top as usize / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// One kernel position with a non-empty valid output range; skipping
/// empty taps up front keeps small-spatial convolutions from paying the
/// full kh*kw loop overhead per channel pair.
struct Tap {
    k_idx: usize,
    off_h: isize,
    off_w: isize,
    lo_h: usize,
    hi_h: usize,
    lo_w: usize,
    hi_w: usize,
}

#[allow(clippy::too_many_arguments)]
fn tap_table(
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
) -> alloc::vec::Vec<Tap> {
    let p = padding as isize;
    let mut taps = alloc::vec::Vec::with_capacity(kh * kw);
    for r in 0..kh {
        let off_h = r as isize - p;
        let (lo_h, hi_h) = valid_range(oh, stride, off_h, h);
        if lo_h >= hi_h {
            continue;
        }
        for q in 0..kw {
            let off_w = q as isize - p;
            let (lo_w, hi_w) = valid_range(ow, stride, off_w, w);
            if lo_w >= hi_w {
                continue;
            }
            taps.push(Tap { k_idx: r * kw + q, off_h, off_w, lo_h, hi_h, lo_w, hi_w });
        }
    }
    taps
}

fn conv_out_dim(len: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = len + 2 * padding;
    if padded < k {
        return Err(Error::Dim(format!(
            "kernel extent {k} exceeds padded input extent {padded}"
        )));
    }
    if (padded - k) % stride != 0 {
        return Err(Error::Config(format!(
            "non-integer output size: ({len} + 2*{padding} - {k}) not divisible by stride {stride}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// 2-D cross-correlation with zero padding (no kernel flip).
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (n, cin, h, w) = input.dims4()?;
    let (cout, kcin, kh, kw) = kernel.dims4()?;
    if kcin != cin {
        return Err(Error::Dim(format!(
            "input channel axis ({cin}) does not match kernel channel axis ({kcin})"
        )));
    }
    if bias.shape() != [cout] {
        return Err(Error::Dim(format!(
            "bias shape {:?} does not match output channels [{cout}]",
            bias.shape()
        )));
    }
    if stride < 1 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    let oh = conv_out_dim(h, kh, stride, padding)?;
    let ow = conv_out_dim(w, kw, stride, padding)?;

    let mut out = Tensor::zeros(vec![n, cout, oh, ow]);
    let src = input.data();
    let ker = kernel.data();
    let b = bias.data();
    let dst = out.data_mut();
    let taps = tap_table(kh, kw, stride, padding, h, w, oh, ow);

    for bn in 0..n {
        for co in 0..cout {
            let obase = (bn * cout + co) * oh * ow;
            dst[obase..obase + oh * ow].iter_mut().for_each(|v| *v = b[co]);
            let kbase = co * cin * kh * kw;
            for ci in 0..cin {
                let ibase = (bn * cin + ci) * h * w;
                for tap in &taps {
                    let wgt = ker[kbase + ci * kh * kw + tap.k_idx];
                    for oy in tap.lo_h..tap.hi_h {
                        let iy = (oy * stride) as isize + tap.off_h;
                        let irow = ibase + iy as usize * w;
                        let orow = obase + oy * ow;
                        if stride == 1 {
                            let ix0 = (tap.lo_w as isize + tap.off_w) as usize;
                            let len = tap.hi_w - tap.lo_w;
                            let inr = &src[irow + ix0..irow + ix0 + len];
                            let out_r = &mut dst[orow + tap.lo_w..orow + tap.lo_w + len];
                            for (o, &i) in out_r.iter_mut().zip(inr) {
                                *o += wgt * i;
                            }
                        } else {
                            for ox in tap.lo_w..tap.hi_w {
                                let ix = (ox * stride) as isize + tap.off_w;
                                dst[orow + ox] += wgt * src[irow + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(out.all_finite(), "conv2d produced non-finite values");
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernel, and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, cin, h, w) = input.dims4()?;
    let (cout, _, kh, kw) = kernel.dims4()?;
    let (gn, gco, oh, ow) = grad_out.dims4()?;
    if gn != n || gco != cout {
        return Err(Error::Dim("grad_out shape does not match conv output".into()));
    }

    let mut gin = Tensor::zeros(vec![n, cin, h, w]);
    let mut gker = Tensor::zeros(vec![cout, cin, kh, kw]);
    let mut gbias = Tensor::zeros(vec![cout]);

    let src = input.data();
    let ker = kernel.data();
    let go = grad_out.data();

    {
        let gb = gbias.data_mut();
        for bn in 0..n {
            for co in 0..cout {
                let obase = (bn * cout + co) * oh * ow;
                let mut acc = T::ZERO;
                for &g in &go[obase..obase + oh * ow] {
                    acc += g;
                }
                gb[co] += acc;
            }
        }
    }

    let gk = gker.data_mut();
    let gi = gin.data_mut();
    let taps = tap_table(kh, kw, stride, padding, h, w, oh, ow);
    for bn in 0..n {
        for co in 0..cout {
            let obase = (bn * cout + co) * oh * ow;
            for ci in 0..cin {
                let ibase = (bn * cin + ci) * h * w;
                let kbase = (co * cin + ci) * kh * kw;
                for tap in &taps {
                    let kidx = kbase + tap.k_idx;
                    let wgt = ker[kidx];
                    let mut kacc = T::ZERO;
                    for oy in tap.lo_h..tap.hi_h {
                        let iy = (oy * stride) as isize + tap.off_h;
                        let irow = ibase + iy as usize * w;
                        let orow = obase + oy * ow;
                        if stride == 1 {
                            let ix0 = (tap.lo_w as isize + tap.off_w) as usize;
                            let len = tap.hi_w - tap.lo_w;
                            let go_r = &go[orow + tap.lo_w..orow + tap.lo_w + len];
                            let in_r = &src[irow + ix0..irow + ix0 + len];
                            let gi_r = &mut gi[irow + ix0..irow + ix0 + len];
                            for ((g, &i), dst) in go_r.iter().zip(in_r).zip(gi_r) {
                                kacc += *g * i;
                                *dst += *g * wgt;
                            }
                        } else {
                            for ox in tap.lo_w..tap.hi_w {
                                let ix = ((ox * stride) as isize + tap.off_w) as usize;
                                let g = go[orow + ox];
                                kacc += g * src[irow + ix];
                                gi[irow + ix] += g * wgt;
                            }
                        }
                    }
                    gk[kidx] += kacc;
                }
            }
        }
    }
    Ok((gin, gker, gbias))
}

/// Max pooling; also returns the flat input index of each window maximum
/// (first row-major index wins on ties) for the backward pass.
pub fn maxpool2d<T: Scalar>(
    input: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = input.dims4()?;
    if window < 1 || stride < 1 {
        return Err(Error::Config("pool window and stride must be >= 1".into()));
    }
    if window > h || window > w {
        return Err(Error::Dim(format!(
            "pool window {window} larger than input {h}x{w}"
        )));
    }
    if (h - window) % stride != 0 || (w - window) % stride != 0 {
        return Err(Error::Config(format!(
            "non-integer pool output for input {h}x{w}, window {window}, stride {stride}"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;

    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let mut argmax = vec![0usize; n * c * oh * ow];
    let src = input.data();
    let dst = out.data_mut();

    for plane in 0..n * c {
        let ibase = plane * h * w;
        let obase = plane * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = src[ibase + oy * stride * w + ox * stride];
                let mut best_idx = ibase + oy * stride * w + ox * stride;
                for ky in 0..window {
                    let irow = ibase + (oy * stride + ky) * w + ox * stride;
                    for kx in 0..window {
                        let v = src[irow + kx];
                        if v > best {
                            best = v;
                            best_idx = irow + kx;
                        }
                    }
                }
                dst[obase + oy * ow + ox] = best;
                argmax[obase + oy * ow + ox] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to the recorded argmax position.
pub fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let mut gin = Tensor::zeros(input_shape.to_vec());
    let gi = gin.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        gi[idx] += g;
    }
    gin
}

/// Per-channel statistics saved by the train-mode batchnorm forward.
#[derive(Debug, Clone)]
pub struct BatchNormSaved<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    /// Population variance (divisor N*H*W).
    pub var: Vec<T>,
}

/// Train-mode batch normalization over (N, H, W) per channel.
pub fn batchnorm2d_train<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, BatchNormSaved<T>)> {
    let (n, c, h, w) = input.dims4()?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::Dim(format!(
            "gamma/beta must have shape [{c}], got {:?}/{:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    let m = n * h * w;
    if m == 0 {
        return Err(Error::Dim("batchnorm over zero elements".into()));
    }
    let minv = T::ONE / T::from_usize(m);
    let src = input.data();
    let plane = h * w;

    let mut mean = vec![T::ZERO; c];
    let mut var = vec![T::ZERO; c];
    for ch in 0..c {
        let mut acc = T::ZERO;
        for bn in 0..n {
            let base = (bn * c + ch) * plane;
            for &v in &src[base..base + plane] {
                acc += v;
            }
        }
        let mu = acc * minv;
        let mut vacc = T::ZERO;
        for bn in 0..n {
            let base = (bn * c + ch) * plane;
            for &v in &src[base..base + plane] {
                let d = v - mu;
                vacc += d * d;
            }
        }
        mean[ch] = mu;
        var[ch] = vacc * minv;
    }

    let mut xhat = Tensor::zeros(vec![n, c, h, w]);
    let mut out = Tensor::zeros(vec![n, c, h, w]);
    let inv_std: Vec<T> = var.iter().map(|&v| T::ONE / (v + eps).sqrt()).collect();
    {
        let xh = xhat.data_mut();
        let dst = out.data_mut();
        let g = gamma.data();
        let b = beta.data();
        for bn in 0..n {
            for ch in 0..c {
                let base = (bn * c + ch) * plane;
                let (mu, is, ga, be) = (mean[ch], inv_std[ch], g[ch], b[ch]);
                for i in base..base + plane {
                    let v = (src[i] - mu) * is;
                    xh[i] = v;
                    dst[i] = ga * v + be;
                }
            }
        }
    }
    Ok((out, BatchNormSaved { xhat, inv_std, mean, var }))
}

/// Eval-mode batch normalization using running statistics.
pub fn batchnorm2d_eval<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    if gamma.shape() != [c] {
        return Err(Error::Dim("gamma shape mismatch".into()));
    }
    let plane = h * w;
    let mut out = Tensor::zeros(vec![n, c, h, w]);
    let src = input.data();
    let dst = out.data_mut();
    let (g, b) = (gamma.data(), beta.data());
    let (rm, rv) = (running_mean.data(), running_var.data());
    for bn in 0..n {
        for ch in 0..c {
            let base = (bn * c + ch) * plane;
            let is = T::ONE / (rv[ch] + eps).sqrt();
            let (mu, ga, be) = (rm[ch], g[ch], b[ch]);
            for i in base..base + plane {
                dst[i] = ga * (src[i] - mu) * is + be;
            }
        }
    }
    Ok(out)
}

/// Gradients of train-mode batchnorm. `m` is the per-channel population
/// size N*H*W; the batch statistics' dependence on the input is included.
pub fn batchnorm2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    saved: &BatchNormSaved<T>,
    gamma: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, c, h, w) = grad_out.dims4()?;
    let plane = h * w;
    let m = T::from_usize(n * plane);

    let go = grad_out.data();
    let xh = saved.xhat.data();
    let g = gamma.data();

    let mut ggamma = Tensor::zeros(vec![c]);
    let mut gbeta = Tensor::zeros(vec![c]);
    let mut gin = Tensor::zeros(vec![n, c, h, w]);

    let gg = ggamma.data_mut();
    let gb = gbeta.data_mut();
    for ch in 0..c {
        let mut sg = T::ZERO;
        let mut sgx = T::ZERO;
        for bn in 0..n {
            let base = (bn * c + ch) * plane;
            for i in base..base + plane {
                sg += go[i];
                sgx += go[i] * xh[i];
            }
        }
        gb[ch] = sg;
        gg[ch] = sgx;
    }

    let gi = gin.data_mut();
    for ch in 0..c {
        // dL/dx = inv_std/m * (m*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
        let ga = g[ch];
        let scale = saved.inv_std[ch] / m;
        let sum_dxhat = gb[ch] * ga;
        let sum_dxhat_xhat = gg[ch] * ga;
        for bn in 0..n {
            let base = (bn * c + ch) * plane;
            for i in base..base + plane {
                let dxhat = go[i] * ga;
                gi[i] = scale * (m * dxhat - sum_dxhat - xh[i] * sum_dxhat_xhat);
            }
        }
    }
    Ok((gin, ggamma, gbeta))
}

/// Affine map `input * weight^T + bias`.
pub fn dense<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f) = input.dims2()?;
    let (fout, fw) = weight.dims2()?;
    if fw != f {
        return Err(Error::Dim(format!(
            "dense inner dimensions disagree: input has {f} features, weight expects {fw}"
        )));
    }
    if bias.shape() != [fout] {
        return Err(Error::Dim(format!("bias shape {:?} != [{fout}]", bias.shape())));
    }
    let mut out = Tensor::zeros(vec![n, fout]);
    let src = input.data();
    let wd = weight.data();
    let b = bias.data();
    let dst = out.data_mut();
    for row in 0..n {
        let in_r = &src[row * f..(row + 1) * f];
        let out_r = &mut dst[row * fout..(row + 1) * fout];
        for fo in 0..fout {
            let w_r = &wd[fo * f..(fo + 1) * f];
            let mut acc = T::ZERO;
            for (&a, &wv) in in_r.iter().zip(w_r) {
                acc += a * wv;
            }
            out_r[fo] = acc + b[fo];
        }
    }
    debug_assert!(out.all_finite(), "dense produced non-finite values");
    Ok(out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, f) = input.dims2()?;
    let (fout, _) = weight.dims2()?;
    let mut gin = Tensor::zeros(vec![n, f]);
    let mut gw = Tensor::zeros(vec![fout, f]);
    let mut gb = Tensor::zeros(vec![fout]);
    let src = input.data();
    let wd = weight.data();
    let go = grad_out.data();
    {
        let gi = gin.data_mut();
        let gwd = gw.data_mut();
        let gbd = gb.data_mut();
        for row in 0..n {
            let in_r = &src[row * f..(row + 1) * f];
            let go_r = &go[row * fout..(row + 1) * fout];
            let gi_r = &mut gi[row * f..(row + 1) * f];
            for fo in 0..fout {
                let g = go_r[fo];
                gbd[fo] += g;
                let w_r = &wd[fo * f..(fo + 1) * f];
                let gw_r = &mut gwd[fo * f..(fo + 1) * f];
                for i in 0..f {
                    gi_r[i] += g * w_r[i];
                    gw_r[i] += g * in_r[i];
                }
            }
        }
    }
    Ok((gin, gw, gb))
}

pub fn activation<T: Scalar>(input: &Tensor<T>, kind: Act) -> Tensor<T> {
    let six = T::from_f64(6.0);
    match kind {
        Act::Relu => input.map(|v| v.maxv(T::ZERO)),
        Act::Relu6 => input.map(|v| v.maxv(T::ZERO).minv(six)),
    }
}

/// Gradient passes only strictly inside the active region; the
/// subgradient at clamp points is zero.
pub fn activation_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>, kind: Act) -> Tensor<T> {
    let six = T::from_f64(6.0);
    let mut gin = Tensor::zeros(input.shape().to_vec());
    let gi = gin.data_mut();
    for ((&x, &g), dst) in input.data().iter().zip(grad_out.data()).zip(gi.iter_mut()) {
        let pass = match kind {
            Act::Relu => x > T::ZERO,
            Act::Relu6 => x > T::ZERO && x < six,
        };
        if pass {
            *dst = g;
        }
    }
    gin
}

/// Clamp to [0, 1]; used as the decoder output squash.
pub fn unit_clamp<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| v.maxv(T::ZERO).minv(T::ONE))
}

pub fn unit_clamp_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut gin = Tensor::zeros(input.shape().to_vec());
    let gi = gin.data_mut();
    for ((&x, &g), dst) in input.data().iter().zip(grad_out.data()).zip(gi.iter_mut()) {
        if x > T::ZERO && x < T::ONE {
            *dst = g;
        }
    }
    gin
}

/// Row-wise softmax (max-subtracted) and mean cross-entropy loss.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>)> {
    let (n, c) = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::Dim(format!(
            "{} labels for {n} logit rows",
            labels.len()
        )));
    }
    for (row, &l) in labels.iter().enumerate() {
        if l >= c {
            return Err(Error::Label { row, label: l, classes: c });
        }
    }
    let src = logits.data();
    let mut probs = Tensor::zeros(vec![n, c]);
    let dst = probs.data_mut();
    let mut loss_sum = T::ZERO;
    for row in 0..n {
        let x = &src[row * c..(row + 1) * c];
        let mut m = x[0];
        for &v in x {
            m = m.maxv(v);
        }
        let mut s = T::ZERO;
        let p = &mut dst[row * c..(row + 1) * c];
        for (i, &v) in x.iter().enumerate() {
            let e = (v - m).exp();
            p[i] = e;
            s += e;
        }
        let sinv = T::ONE / s;
        for v in p.iter_mut() {
            *v *= sinv;
        }
        // -ln p[label] computed in log space for stability
        loss_sum += s.ln() - (x[labels[row]] - m);
    }
    let loss = loss_sum / T::from_usize(n);
    if !loss.is_finite() {
        return Err(Error::Optim("non-finite cross-entropy loss".into()));
    }
    Ok((loss, probs))
}

/// d(loss)/d(logits) given saved probabilities, scaled by `upstream`.
pub fn softmax_cross_entropy_backward<T: Scalar>(
    probs: &Tensor<T>,
    labels: &[usize],
    upstream: T,
) -> Tensor<T> {
    let (n, c) = probs.dims2().expect("probs is 2-D");
    let scale = upstream / T::from_usize(n);
    let mut gin = probs.clone();
    let g = gin.data_mut();
    for (row, &l) in labels.iter().enumerate() {
        g[row * c + l] -= T::ONE;
    }
    g.iter_mut().for_each(|v| *v *= scale);
    gin
}

/// Mean squared error against a constant target.
pub fn mse_loss<T: Scalar>(input: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if input.shape() != target.shape() {
        return Err(Error::Dim(format!(
            "mse shapes differ: {:?} vs {:?}",
            input.shape(),
            target.shape()
        )));
    }
    let mut acc = T::ZERO;
    for (&a, &b) in input.data().iter().zip(target.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / T::from_usize(input.numel()))
}

pub fn mse_loss_backward<T: Scalar>(input: &Tensor<T>, target: &Tensor<T>, upstream: T) -> Tensor<T> {
    let scale = T::from_f64(2.0) * upstream / T::from_usize(input.numel());
    let mut gin = Tensor::zeros(input.shape().to_vec());
    let g = gin.data_mut();
    for ((&a, &b), dst) in input.data().iter().zip(target.data()).zip(g.iter_mut()) {
        *dst = scale * (a - b);
    }
    gin
}

/// Elementwise sum of two same-shape tensors.
pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::Dim(format!(
            "add shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += v;
    }
    Ok(out)
}

pub fn scale<T: Scalar>(a: &Tensor<T>, factor: T) -> Tensor<T> {
    a.map(|v| v * factor)
}

/// Mean over the spatial axes: [N,C,H,W] -> [N,C].
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let inv = T::ONE / T::from_usize(plane);
    let mut out = Tensor::zeros(vec![n, c]);
    let src = input.data();
    let dst = out.data_mut();
    for i in 0..n * c {
        let mut acc = T::ZERO;
        for &v in &src[i * plane..(i + 1) * plane] {
            acc += v;
        }
        dst[i] = acc * inv;
    }
    Ok(out)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (input_shape[2], input_shape[3]);
    let plane = h * w;
    let inv = T::ONE / T::from_usize(plane);
    let mut gin = Tensor::zeros(input_shape.to_vec());
    let gi = gin.data_mut();
    for (i, &g) in grad_out.data().iter().enumerate() {
        let v = g * inv;
        for dst in &mut gi[i * plane..(i + 1) * plane] {
            *dst = v;
        }
    }
    gin
}

/// Nearest-neighbour 2x spatial upsampling.
pub fn upsample_nearest_2x<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let mut out = Tensor::zeros(vec![n, c, 2 * h, 2 * w]);
    let src = input.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let ibase = plane * h * w;
        let obase = plane * 4 * h * w;
        for y in 0..h {
            for x in 0..w {
                let v = src[ibase + y * w + x];
                let o = obase + 2 * y * 2 * w + 2 * x;
                dst[o] = v;
                dst[o + 1] = v;
                dst[o + 2 * w] = v;
                dst[o + 2 * w + 1] = v;
            }
        }
    }
    Ok(out)
}

pub fn upsample_nearest_2x_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (input_shape[2], input_shape[3]);
    let planes = input_shape[0] * input_shape[1];
    let mut gin = Tensor::zeros(input_shape.to_vec());
    let gi = gin.data_mut();
    let go = grad_out.data();
    for plane in 0..planes {
        let ibase = plane * h * w;
        let obase = plane * 4 * h * w;
        for y in 0..h {
            for x in 0..w {
                let o = obase + 2 * y * 2 * w + 2 * x;
                gi[ibase + y * w + x] = go[o] + go[o + 1] + go[o + 2 * w] + go[o + 2 * w + 1];
            }
        }
    }
    gin
}

/// Concatenates along the channel axis; all inputs share N, H, W.
pub fn concat_channels<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    if inputs.is_empty() {
        return Err(Error::Dim("concat of zero tensors".into()));
    }
    let (n, _, h, w) = inputs[0].dims4()?;
    let mut ctotal = 0;
    for t in inputs {
        let (tn, tc, th, tw) = t.dims4()?;
        if tn != n || th != h || tw != w {
            return Err(Error::Dim("concat inputs disagree on N/H/W".into()));
        }
        ctotal += tc;
    }
    let plane = h * w;
    let mut out = Tensor::zeros(vec![n, ctotal, h, w]);
    let dst = out.data_mut();
    for bn in 0..n {
        let mut coff = 0;
        for t in inputs {
            let tc = t.shape()[1];
            let src = t.data();
            let from = (bn * tc) * plane;
            let to = (bn * ctotal + coff) * plane;
            dst[to..to + tc * plane].copy_from_slice(&src[from..from + tc * plane]);
            coff += tc;
        }
    }
    Ok(out)
}

/// Splits a channel-concat gradient back into per-input gradients.
pub fn concat_channels_backward<T: Scalar>(
    input_shapes: &[Vec<usize>],
    grad_out: &Tensor<T>,
) -> Vec<Tensor<T>> {
    let (n, ctotal, h, w) = grad_out.dims4().expect("grad_out is 4-D");
    let plane = h * w;
    let go = grad_out.data();
    let mut grads: Vec<Tensor<T>> = input_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect();
    for bn in 0..n {
        let mut coff = 0;
        for g in grads.iter_mut() {
            let tc = g.shape()[1];
            let to = (bn * tc) * plane;
            let from = (bn * ctotal + coff) * plane;
            g.data_mut()[to..to + tc * plane].copy_from_slice(&go[from..from + tc * plane]);
            coff += tc;
        }
    }
    grads
}
