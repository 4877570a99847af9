//! Central-finite-difference gradient checking in f64.
//!
//! The difference quotients here only ever call the forward ops, so they
//! stay independent of the backward rules they validate. Architecture
//! checks probe at the base step first and fall back to finer steps
//! where relu6 kink crossings pollute the quotient (the quotient then
//! converges to the analytic value, so the gradient is not at fault).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{ArchId, ModelGraph};
use crate::ops::{self, Act};
use crate::rng::Rng;
use crate::tape::Tape;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub coords_checked: usize,
    /// Largest accepted relative error.
    pub max_rel_err: f64,
    /// Coordinates that needed a finer probe step.
    pub refined: usize,
}

impl CheckReport {
    fn absorb(&mut self, other: CheckReport) {
        self.coords_checked += other.coords_checked;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.refined += other.refined;
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

fn rand_tensor(shape: &[usize], rng: &mut Rng, scale: f64) -> Tensor<f64> {
    let mut t = Tensor::zeros(shape.to_vec());
    for v in t.data_mut() {
        *v = (rng.f64() * 2.0 - 1.0) * scale;
    }
    t
}

/// Fixed non-uniform reduction weights so upstream gradients vary.
fn weight_vec(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.3 + ((i * 37 + 11) % 23) as f64 / 23.0).collect()
}

fn weighted_sum(t: &Tensor<f64>) -> f64 {
    t.data()
        .iter()
        .zip(weight_vec(t.numel()))
        .map(|(&v, w)| v * w)
        .sum()
}

/// Checks every coordinate of every input against central differences.
/// `forward` maps the inputs to a scalar; `analytic` are the tape's
/// gradients for the same inputs.
fn check_coords(
    inputs: &[Tensor<f64>],
    forward: &dyn Fn(&[Tensor<f64>]) -> f64,
    analytic: &[Tensor<f64>],
    step: f64,
    tol: f64,
    what: &str,
) -> Result<CheckReport, String> {
    let mut report = CheckReport::default();
    for (ti, (input, grad)) in inputs.iter().zip(analytic).enumerate() {
        if input.shape() != grad.shape() {
            return Err(format!("{what}: gradient shape mismatch on input {ti}"));
        }
        for i in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[ti].data_mut()[i] += step;
            let mut minus = inputs.to_vec();
            minus[ti].data_mut()[i] -= step;
            let numeric = (forward(&plus) - forward(&minus)) / (2.0 * step);
            let a = grad.data()[i];
            if a.abs() < 1e-8 && numeric.abs() < 1e-8 {
                report.coords_checked += 1;
                continue;
            }
            let err = rel_err(a, numeric);
            if err >= tol {
                return Err(format!(
                    "{what}: input {ti} coord {i}: analytic {a} vs numeric {numeric} (rel {err})"
                ));
            }
            report.coords_checked += 1;
            report.max_rel_err = report.max_rel_err.max(err);
        }
    }
    Ok(report)
}

/// Reduce a tape node to a scalar loss with fixed non-uniform weights.
fn reduce(tape: &mut Tape<f64>, node: crate::tape::NodeId) -> crate::tape::NodeId {
    let n = tape.value(node).numel();
    let flat = tape.reshape(node, vec![1, n]).expect("flatten for reduction");
    let w = tape.leaf(Tensor::new(vec![1, n], weight_vec(n)).expect("weight tensor"));
    let b = tape.leaf(Tensor::zeros(vec![1]));
    tape.dense(flat, w, b).expect("reduction dense")
}

/// Gradient checks for every layer primitive in isolation.
pub fn check_primitives(seed: u64, step: f64, tol: f64) -> Result<CheckReport, String> {
    let mut rng = Rng::new(seed);
    let mut total = CheckReport::default();

    // conv2d over stride/padding variants
    for &(stride, pad, k) in &[(1usize, 0usize, 3usize), (1, 1, 3), (1, 2, 5), (2, 1, 4)] {
        let x = rand_tensor(&[2, 3, 6, 6], &mut rng, 1.0);
        let kern = rand_tensor(&[4, 3, k, k], &mut rng, 0.5);
        let b = rand_tensor(&[4], &mut rng, 0.5);
        let inputs = vec![x, kern, b];
        let fwd = move |ins: &[Tensor<f64>]| {
            weighted_sum(&ops::conv2d(&ins[0], &ins[1], &ins[2], stride, pad).expect("conv fwd"))
        };
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let ki = tape.leaf(inputs[1].clone());
        let bi = tape.leaf(inputs[2].clone());
        let y = tape.conv2d(xi, ki, bi, stride, pad).map_err(|e| e.to_string())?;
        let loss = reduce(&mut tape, y);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![
            grads.take(xi, inputs[0].shape()),
            grads.take(ki, inputs[1].shape()),
            grads.take(bi, inputs[2].shape()),
        ];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, &format!("conv2d s{stride} p{pad}"))?);
    }

    // maxpool2d
    {
        let x = rand_tensor(&[1, 2, 6, 6], &mut rng, 1.0);
        let inputs = vec![x];
        let fwd = |ins: &[Tensor<f64>]| weighted_sum(&ops::maxpool2d(&ins[0], 2, 2).expect("pool fwd").0);
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let y = tape.maxpool2d(xi, 2, 2).map_err(|e| e.to_string())?;
        let loss = reduce(&mut tape, y);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![grads.take(xi, inputs[0].shape())];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "maxpool2d")?);
    }

    // batchnorm (train mode)
    {
        let x = rand_tensor(&[2, 3, 4, 4], &mut rng, 1.0);
        let gamma = rand_tensor(&[3], &mut rng, 1.0);
        let beta = rand_tensor(&[3], &mut rng, 1.0);
        let inputs = vec![x, gamma, beta];
        let fwd = |ins: &[Tensor<f64>]| {
            weighted_sum(&ops::batchnorm2d_train(&ins[0], &ins[1], &ins[2], 1e-5).expect("bn fwd").0)
        };
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let gi = tape.leaf(inputs[1].clone());
        let bi = tape.leaf(inputs[2].clone());
        let (y, _, _) = tape.batchnorm2d(xi, gi, bi, 1e-5).map_err(|e| e.to_string())?;
        let loss = reduce(&mut tape, y);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![
            grads.take(xi, inputs[0].shape()),
            grads.take(gi, inputs[1].shape()),
            grads.take(bi, inputs[2].shape()),
        ];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "batchnorm2d")?);
    }

    // dense
    {
        let x = rand_tensor(&[3, 5], &mut rng, 1.0);
        let w = rand_tensor(&[4, 5], &mut rng, 1.0);
        let b = rand_tensor(&[4], &mut rng, 1.0);
        let inputs = vec![x, w, b];
        let fwd = |ins: &[Tensor<f64>]| weighted_sum(&ops::dense(&ins[0], &ins[1], &ins[2]).expect("dense fwd"));
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let wi = tape.leaf(inputs[1].clone());
        let bi = tape.leaf(inputs[2].clone());
        let y = tape.dense(xi, wi, bi).map_err(|e| e.to_string())?;
        let loss = reduce(&mut tape, y);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![
            grads.take(xi, inputs[0].shape()),
            grads.take(wi, inputs[1].shape()),
            grads.take(bi, inputs[2].shape()),
        ];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "dense")?);
    }

    // activations and unit clamp, inputs nudged off the kinks
    for kind in [Act::Relu, Act::Relu6] {
        let mut x = rand_tensor(&[2, 2, 4, 4], &mut rng, 4.0);
        for v in x.data_mut() {
            if v.abs() < 0.01 {
                *v += 0.05;
            }
            if (*v - 6.0).abs() < 0.01 {
                *v -= 0.05;
            }
        }
        let inputs = vec![x];
        let fwd = move |ins: &[Tensor<f64>]| weighted_sum(&ops::activation(&ins[0], kind));
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let y = tape.activation(xi, kind);
        let loss = reduce(&mut tape, y);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![grads.take(xi, inputs[0].shape())];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "activation")?);
    }
    {
        let mut x = rand_tensor(&[1, 1, 4, 4], &mut rng, 2.0);
        for v in x.data_mut() {
            if v.abs() < 0.01 || (*v - 1.0).abs() < 0.01 {
                *v += 0.05;
            }
        }
        let inputs = vec![x];
        let fwd = |ins: &[Tensor<f64>]| weighted_sum(&ops::unit_clamp(&ins[0]));
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let y = tape.unit_clamp(xi);
        let loss = reduce(&mut tape, y);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![grads.take(xi, inputs[0].shape())];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "unit_clamp")?);
    }

    // composite: upsample -> pool -> add -> concat -> gap -> scale
    {
        let a = rand_tensor(&[2, 2, 2, 2], &mut rng, 1.0);
        let b = rand_tensor(&[2, 2, 2, 2], &mut rng, 1.0);
        let inputs = vec![a, b];
        let fwd = |ins: &[Tensor<f64>]| {
            let up = ops::upsample_nearest_2x(&ins[0]).expect("up");
            let (down, _) = ops::maxpool2d(&up, 2, 2).expect("pool");
            let sum = ops::add(&down, &ins[1]).expect("add");
            let cat = ops::concat_channels(&[&sum, &ins[0]]).expect("cat");
            let gap = ops::global_avg_pool(&cat).expect("gap");
            weighted_sum(&ops::scale(&gap, 1.7))
        };
        let mut tape = Tape::new();
        let ai = tape.leaf(inputs[0].clone());
        let bi = tape.leaf(inputs[1].clone());
        let up = tape.upsample_2x(ai).map_err(|e| e.to_string())?;
        let down = tape.maxpool2d(up, 2, 2).map_err(|e| e.to_string())?;
        let sum = tape.add(down, bi).map_err(|e| e.to_string())?;
        let cat = tape.concat_channels(&[sum, ai]).map_err(|e| e.to_string())?;
        let gap = tape.global_avg_pool(cat).map_err(|e| e.to_string())?;
        let sc = tape.scale(gap, 1.7);
        let loss = reduce(&mut tape, sc);
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![grads.take(ai, inputs[0].shape()), grads.take(bi, inputs[1].shape())];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "composite ops")?);
    }

    // softmax cross-entropy
    {
        let logits = rand_tensor(&[3, 5], &mut rng, 2.0);
        let labels = [0usize, 3, 4];
        let inputs = vec![logits];
        let fwd = move |ins: &[Tensor<f64>]| {
            ops::softmax_cross_entropy(&ins[0], &[0, 3, 4]).expect("sce fwd").0
        };
        let mut tape = Tape::new();
        let li = tape.leaf(inputs[0].clone());
        let (loss, _) = tape.softmax_cross_entropy(li, &labels).map_err(|e| e.to_string())?;
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![grads.take(li, inputs[0].shape())];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "softmax_cross_entropy")?);
    }

    // mse
    {
        let x = rand_tensor(&[2, 1, 4, 4], &mut rng, 1.0);
        let target = rand_tensor(&[2, 1, 4, 4], &mut rng, 1.0);
        let inputs = vec![x];
        let tgt = target.clone();
        let fwd = move |ins: &[Tensor<f64>]| ops::mse_loss(&ins[0], &tgt).expect("mse fwd");
        let mut tape = Tape::new();
        let xi = tape.leaf(inputs[0].clone());
        let loss = tape.mse_loss(xi, target).map_err(|e| e.to_string())?;
        let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
        let analytic = vec![grads.take(xi, inputs[0].shape())];
        total.absorb(check_coords(&inputs, &fwd, &analytic, step, tol, "mse")?);
    }

    Ok(total)
}

/// Samples coordinates of every trainable tensor of an architecture at
/// tiny resolution and validates the tape gradients of a train-mode
/// cross-entropy loss against central differences.
pub fn check_architecture(
    arch: ArchId,
    res: usize,
    seed: u64,
    coords_per_tensor: usize,
    step: f64,
    tol: f64,
) -> Result<CheckReport, String> {
    let mut model = ModelGraph::<f64>::build(arch, 3, res, seed).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(seed ^ 0xABCD);
    // a batch of 6 keeps batchnorm populations conditioned even where
    // the spatial extent has collapsed to 1x1
    let x = rand_tensor(&[6, 1, res, res], &mut rng, 1.0);
    let labels = [0usize, 2, 1, 0, 2, 1];

    fn loss_of(m: &mut ModelGraph<f64>, x: &Tensor<f64>, labels: &[usize]) -> f64 {
        let mut tape = Tape::new();
        let pass = m.forward_train(&mut tape, x.clone()).expect("forward");
        let (loss, _) = tape.softmax_cross_entropy(pass.output, labels).expect("loss");
        tape.value(loss).item().expect("scalar loss")
    }

    let mut tape = Tape::new();
    let pass = model.forward_train(&mut tape, x.clone()).map_err(|e| e.to_string())?;
    let (loss, _) = tape.softmax_cross_entropy(pass.output, &labels).map_err(|e| e.to_string())?;
    let mut grads = tape.backward(loss).map_err(|e| e.to_string())?;
    model.zero_grads();
    model.accumulate_grads(&pass, &mut grads);
    drop(tape);

    let mut report = CheckReport::default();
    for pi in 0..model.params().len() {
        if !model.params()[pi].trainable {
            continue;
        }
        let numel = model.params()[pi].value.numel();
        let stride = (numel / coords_per_tensor).max(1);
        let mut coord_rng = Rng::new(seed ^ (pi as u64) << 3);
        for j in 0..coords_per_tensor.min(numel) {
            let i = (j * stride + coord_rng.below(stride.max(1))).min(numel - 1);
            let analytic = model.params()[pi].grad.data()[i];
            let orig = model.params()[pi].value.data()[i];
            let mut accepted = false;
            let mut trace: Vec<(f64, f64, f64)> = Vec::new();
            for (si, probe) in [step, step / 10.0, step / 100.0].into_iter().enumerate() {
                model.params_mut()[pi].value.data_mut()[i] = orig + probe;
                let lp = loss_of(&mut model, &x, &labels);
                model.params_mut()[pi].value.data_mut()[i] = orig - probe;
                let lm = loss_of(&mut model, &x, &labels);
                model.params_mut()[pi].value.data_mut()[i] = orig;
                let numeric = (lp - lm) / (2.0 * probe);
                if analytic.abs() < 1e-8 && numeric.abs() < 1e-8 {
                    accepted = true;
                    break;
                }
                let err = rel_err(analytic, numeric);
                trace.push((probe, numeric, err));
                if err < tol {
                    if si > 0 {
                        report.refined += 1;
                    }
                    report.max_rel_err = report.max_rel_err.max(err);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(format!(
                    "{:?} param {} coord {i}: analytic {analytic}, probes {trace:?}",
                    arch,
                    model.params()[pi].name
                ));
            }
            report.coords_checked += 1;
        }
    }
    if report.coords_checked == 0 {
        return Err(format!("no coordinates checked for {arch:?}"));
    }
    Ok(report)
}
