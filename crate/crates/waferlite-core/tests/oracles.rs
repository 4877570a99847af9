//! Elementwise agreement of the layer primitives with independent
//! naive-loop references on randomized shapes.

use waferlite_core::ops;
use waferlite_core::rng::Rng;
use waferlite_core::tensor::Tensor;

const INSTANCES: usize = 100;
const TOL: f32 = 1e-5;

fn rand_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f32> {
    let mut t = Tensor::zeros(shape.to_vec());
    for v in t.data_mut() {
        *v = rng.range_f32(-1.0, 1.0);
    }
    t
}

/// Six nested loops, zero padding, cross-correlation; no shared code
/// with the implementation.
fn conv_reference(
    input: &Tensor<f32>,
    kernel: &Tensor<f32>,
    bias: &Tensor<f32>,
    stride: usize,
    padding: usize,
) -> Tensor<f32> {
    let (n, cin, h, w) = input.dims4().unwrap();
    let (cout, _, kh, kw) = kernel.dims4().unwrap();
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let mut out = Tensor::zeros(vec![n, cout, oh, ow]);
    for bn in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.data()[co] as f64;
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let iv = input.data()
                                    [((bn * cin + ci) * h + iy as usize) * w + ix as usize];
                                let kv = kernel.data()[((co * cin + ci) * kh + ky) * kw + kx];
                                acc += iv as f64 * kv as f64;
                            }
                        }
                    }
                    out.data_mut()[((bn * cout + co) * oh + oy) * ow + ox] = acc as f32;
                }
            }
        }
    }
    out
}

fn assert_close(a: &Tensor<f32>, b: &Tensor<f32>, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shapes");
    for (i, (&x, &y)) in a.data().iter().zip(b.data()).enumerate() {
        assert!(
            (x - y).abs() <= TOL * (1.0 + x.abs().max(y.abs())),
            "{what}: element {i}: {x} vs {y}"
        );
    }
}

#[test]
fn conv2d_matches_loop_reference() {
    let mut rng = Rng::new(2024);
    for inst in 0..INSTANCES {
        let n = 1 + rng.below(2);
        let cin = 1 + rng.below(3);
        let cout = 1 + rng.below(4);
        let k = [1, 3, 5][rng.below(3)];
        let stride = 1 + rng.below(2);
        let mut padding = rng.below(k.min(3));
        // pick the output extent, then derive an input extent that
        // satisfies the exact-division contract
        let oh = 1 + rng.below(5);
        if (oh - 1) * stride + k <= 2 * padding {
            padding = 0;
        }
        let h = (oh - 1) * stride + k - 2 * padding;
        let x = rand_tensor(&[n, cin, h, h], &mut rng);
        let kern = rand_tensor(&[cout, cin, k, k], &mut rng);
        let b = rand_tensor(&[cout], &mut rng);
        let got = ops::conv2d(&x, &kern, &b, stride, padding).unwrap();
        let want = conv_reference(&x, &kern, &b, stride, padding);
        assert_close(&got, &want, &format!("conv inst {inst} (h={h} k={k} s={stride} p={padding})"));
    }
}

#[test]
fn conv2d_matches_reference_on_spec_shape() {
    let mut rng = Rng::new(7);
    let x = rand_tensor(&[2, 3, 8, 8], &mut rng);
    let k = rand_tensor(&[4, 3, 3, 3], &mut rng);
    let b = rand_tensor(&[4], &mut rng);
    let got = ops::conv2d(&x, &k, &b, 1, 1).unwrap();
    let want = conv_reference(&x, &k, &b, 1, 1);
    assert_close(&got, &want, "conv 2x3x8x8");
}

/// Windowed max by exhaustive scan.
fn maxpool_reference(input: &Tensor<f32>, window: usize, stride: usize) -> Tensor<f32> {
    let (n, c, h, w) = input.dims4().unwrap();
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                for ky in 0..window {
                    for kx in 0..window {
                        let v = input.data()[plane * h * w + (oy * stride + ky) * w + ox * stride + kx];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out.data_mut()[plane * oh * ow + oy * ow + ox] = best;
            }
        }
    }
    out
}

#[test]
fn maxpool_matches_loop_reference() {
    let mut rng = Rng::new(2025);
    for inst in 0..INSTANCES {
        let n = 1 + rng.below(2);
        let c = 1 + rng.below(3);
        let window = 2 + rng.below(2);
        let stride = 1 + rng.below(window);
        let oh = 1 + rng.below(5);
        let h = (oh - 1) * stride + window;
        let x = rand_tensor(&[n, c, h, h], &mut rng);
        let (got, _) = ops::maxpool2d(&x, window, stride).unwrap();
        let want = maxpool_reference(&x, window, stride);
        assert_close(&got, &want, &format!("maxpool inst {inst}"));
    }
    // the spec's named instance
    let mut rng = Rng::new(5);
    let x = rand_tensor(&[1, 2, 6, 6], &mut rng);
    let (got, _) = ops::maxpool2d(&x, 2, 2).unwrap();
    assert_close(&got, &maxpool_reference(&x, 2, 2), "maxpool 1x2x6x6");
}

/// Triple loop matmul in f64.
fn dense_reference(input: &Tensor<f32>, weight: &Tensor<f32>, bias: &Tensor<f32>) -> Tensor<f32> {
    let (n, f) = input.dims2().unwrap();
    let (fout, _) = weight.dims2().unwrap();
    let mut out = Tensor::zeros(vec![n, fout]);
    for r in 0..n {
        for o in 0..fout {
            let mut acc = bias.data()[o] as f64;
            for i in 0..f {
                acc += input.data()[r * f + i] as f64 * weight.data()[o * f + i] as f64;
            }
            out.data_mut()[r * fout + o] = acc as f32;
        }
    }
    out
}

#[test]
fn dense_matches_loop_reference() {
    let mut rng = Rng::new(2026);
    for inst in 0..INSTANCES {
        let n = 1 + rng.below(6);
        let f = 1 + rng.below(12);
        let fout = 1 + rng.below(9);
        let x = rand_tensor(&[n, f], &mut rng);
        let w = rand_tensor(&[fout, f], &mut rng);
        let b = rand_tensor(&[fout], &mut rng);
        let got = ops::dense(&x, &w, &b).unwrap();
        let want = dense_reference(&x, &w, &b);
        assert_close(&got, &want, &format!("dense inst {inst}"));
    }
    // the spec's named instance: 4x7 input, 5x7 weight
    let mut rng = Rng::new(3);
    let x = rand_tensor(&[4, 7], &mut rng);
    let w = rand_tensor(&[5, 7], &mut rng);
    let b = rand_tensor(&[5], &mut rng);
    assert_close(&ops::dense(&x, &w, &b).unwrap(), &dense_reference(&x, &w, &b), "dense 4x7");
}

/// Log-sum-exp reference evaluated entirely in f64.
fn softmax_ce_reference(logits: &Tensor<f32>, labels: &[usize]) -> (f32, Tensor<f32>) {
    let (n, c) = logits.dims2().unwrap();
    let mut probs = Tensor::zeros(vec![n, c]);
    let mut loss = 0f64;
    for r in 0..n {
        let row: Vec<f64> = logits.data()[r * c..(r + 1) * c].iter().map(|&v| v as f64).collect();
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for i in 0..c {
            probs.data_mut()[r * c + i] = (row[i] - lse).exp() as f32;
        }
        loss += lse - row[labels[r]];
    }
    ((loss / n as f64) as f32, probs)
}

#[test]
fn softmax_ce_matches_high_precision_reference() {
    let mut rng = Rng::new(2027);
    for inst in 0..INSTANCES {
        let n = 1 + rng.below(6);
        let c = 2 + rng.below(7);
        let logits = rand_tensor(&[n, c], &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let (got_loss, got_probs) = ops::softmax_cross_entropy(&logits, &labels).unwrap();
        let (want_loss, want_probs) = softmax_ce_reference(&logits, &labels);
        assert!(
            (got_loss - want_loss).abs() < TOL,
            "softmax inst {inst}: loss {got_loss} vs {want_loss}"
        );
        assert!(got_loss >= 0.0);
        assert_close(&got_probs, &want_probs, &format!("softmax probs inst {inst}"));
        // each probability row sums to 1
        for r in 0..n {
            let s: f32 = got_probs.data()[r * c..(r + 1) * c].iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "row {r} sums to {s}");
        }
    }
    // the spec's named instance: random 3x5 logits
    let mut rng = Rng::new(9);
    let logits = rand_tensor(&[3, 5], &mut rng);
    let (l, _) = ops::softmax_cross_entropy(&logits, &[1, 0, 4]).unwrap();
    let (lr, _) = softmax_ce_reference(&logits, &[1, 0, 4]);
    assert!((l - lr).abs() < 1e-5);
}

#[test]
fn maxpool_backward_mass_conservation_randomized() {
    let mut rng = Rng::new(2028);
    for _ in 0..20 {
        let n = 1 + rng.below(2);
        let c = 1 + rng.below(3);
        let h = 2 * (2 + rng.below(4));
        let x = rand_tensor(&[n, c, h, h], &mut rng);
        let (y, am) = ops::maxpool2d(&x, 2, 2).unwrap();
        let go = rand_tensor(y.shape(), &mut rng);
        let gi = ops::maxpool2d_backward(x.shape(), &am, &go);
        let si: f32 = gi.data().iter().sum();
        let so: f32 = go.data().iter().sum();
        assert!((si - so).abs() < 1e-4, "{si} vs {so}");
    }
}

#[test]
fn batchnorm_train_output_statistics() {
    let mut rng = Rng::new(2029);
    for _ in 0..20 {
        let n = 2 + rng.below(3);
        let c = 1 + rng.below(3);
        let h = 2 + rng.below(5);
        let mut x = rand_tensor(&[n, c, h, h], &mut rng);
        // inflate variance above the 0.1 floor the property assumes
        for v in x.data_mut() {
            *v *= 3.0;
        }
        let gamma = Tensor::filled(vec![c], 1.0f32);
        let beta = Tensor::zeros(vec![c]);
        let (y, saved) = ops::batchnorm2d_train(&x, &gamma, &beta, 1e-5).unwrap();
        let m = (n * h * h) as f64;
        for ch in 0..c {
            let mut sum = 0f64;
            let mut sq = 0f64;
            for bn in 0..n {
                for i in 0..h * h {
                    let v = y.data()[(bn * c + ch) * h * h + i] as f64;
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / m;
            let var = sq / m - mean * mean;
            assert!(mean.abs() < 1e-5, "channel {ch} mean {mean}");
            let batch_var = saved.var[ch] as f64;
            assert!(batch_var > 0.1, "test setup: variance {batch_var} too small");
            let expect = 1.0 / (1.0 + 1e-5 / batch_var);
            assert!((var - expect).abs() < 1e-3, "channel {ch} var {var} vs {expect}");
        }
    }
}
