//! Reverse-mode gradient tape over the layer primitives.
//!
//! A [`Tape`] records every primitive executed during a forward pass,
//! together with the saved intermediates its backward rule needs.
//! [`Tape::backward`] then replays the records in exact reverse
//! execution order, accumulating one gradient slot per node. A tape is
//! confined to one logical thread and is discarded after the step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{self, Act, BatchNormSaved};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Record<T: Scalar> {
    Leaf,
    Conv2d { input: NodeId, kernel: NodeId, bias: NodeId, stride: usize, padding: usize },
    MaxPool2d { input: NodeId, argmax: Vec<usize> },
    BatchNorm { input: NodeId, gamma: NodeId, beta: NodeId, saved: BatchNormSaved<T> },
    Dense { input: NodeId, weight: NodeId, bias: NodeId },
    Activation { input: NodeId, kind: Act },
    UnitClamp { input: NodeId },
    Scale { input: NodeId, factor: T },
    Add { a: NodeId, b: NodeId },
    Reshape { input: NodeId },
    GlobalAvgPool { input: NodeId },
    Upsample2x { input: NodeId },
    ConcatChannels { inputs: Vec<NodeId> },
    SoftmaxCrossEntropy { logits: NodeId, labels: Vec<usize>, probs: Tensor<T> },
    Mse { input: NodeId, target: Tensor<T> },
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    record: Record<T>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for a node; zeros if the node did not influence the loss.
    pub fn take(&mut self, id: NodeId, shape: &[usize]) -> Tensor<T> {
        self.grads[id.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(shape.to_vec()))
    }

    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads[id.0].as_ref()
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor<T>, record: Record<T>) -> NodeId {
        self.nodes.push(Node { value, record });
        NodeId(self.nodes.len() - 1)
    }

    /// Registers an input or parameter value.
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Record::Leaf)
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let out = ops::conv2d(
            self.value(input),
            self.value(kernel),
            self.value(bias),
            stride,
            padding,
        )?;
        Ok(self.push(out, Record::Conv2d { input, kernel, bias, stride, padding }))
    }

    pub fn maxpool2d(&mut self, input: NodeId, window: usize, stride: usize) -> Result<NodeId> {
        let (out, argmax) = ops::maxpool2d(self.value(input), window, stride)?;
        Ok(self.push(out, Record::MaxPool2d { input, argmax }))
    }

    /// Train-mode batchnorm; returns the node and the batch statistics so
    /// the caller can update running stats.
    pub fn batchnorm2d(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: T,
    ) -> Result<(NodeId, Vec<T>, Vec<T>)> {
        let (out, saved) = ops::batchnorm2d_train(self.value(input), self.value(gamma), self.value(beta), eps)?;
        let mean = saved.mean.clone();
        let var = saved.var.clone();
        let id = self.push(out, Record::BatchNorm { input, gamma, beta, saved });
        Ok((id, mean, var))
    }

    pub fn dense(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let out = ops::dense(self.value(input), self.value(weight), self.value(bias))?;
        Ok(self.push(out, Record::Dense { input, weight, bias }))
    }

    pub fn activation(&mut self, input: NodeId, kind: Act) -> NodeId {
        let out = ops::activation(self.value(input), kind);
        self.push(out, Record::Activation { input, kind })
    }

    pub fn unit_clamp(&mut self, input: NodeId) -> NodeId {
        let out = ops::unit_clamp(self.value(input));
        self.push(out, Record::UnitClamp { input })
    }

    pub fn scale(&mut self, input: NodeId, factor: T) -> NodeId {
        let out = ops::scale(self.value(input), factor);
        self.push(out, Record::Scale { input, factor })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(out, Record::Add { a, b }))
    }

    pub fn reshape(&mut self, input: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let out = self.value(input).clone().reshaped(shape)?;
        Ok(self.push(out, Record::Reshape { input }))
    }

    pub fn global_avg_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let out = ops::global_avg_pool(self.value(input))?;
        Ok(self.push(out, Record::GlobalAvgPool { input }))
    }

    pub fn upsample_2x(&mut self, input: NodeId) -> Result<NodeId> {
        let out = ops::upsample_nearest_2x(self.value(input))?;
        Ok(self.push(out, Record::Upsample2x { input }))
    }

    pub fn concat_channels(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor<T>> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let out = ops::concat_channels(&tensors)?;
        Ok(self.push(out, Record::ConcatChannels { inputs: inputs.to_vec() }))
    }

    /// Scalar loss node; the returned probabilities row-normalize to 1.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<(NodeId, Tensor<T>)> {
        let (loss, probs) = ops::softmax_cross_entropy(self.value(logits), labels)?;
        let probs_out = probs.clone();
        let id = self.push(
            Tensor::scalar(loss),
            Record::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs },
        );
        Ok((id, probs_out))
    }

    pub fn mse_loss(&mut self, input: NodeId, target: Tensor<T>) -> Result<NodeId> {
        let loss = ops::mse_loss(self.value(input), &target)?;
        Ok(self.push(Tensor::scalar(loss), Record::Mse { input, target }))
    }

    /// Propagates d(loss)/d(node) to every node that fed the loss.
    ///
    /// `loss` must be a scalar node produced by a recorded forward pass.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients<T>> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward on an empty tape".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::State("loss node not recorded on this tape".into()));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::State("backward requires a scalar loss node".into()));
        }
        if matches!(self.nodes[loss.0].record, Record::Leaf) {
            return Err(Error::State("loss node has no recorded forward op".into()));
        }

        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::ONE));

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else { continue };
            match &self.nodes[idx].record {
                Record::Leaf => {
                    grads[idx] = Some(gout);
                    continue;
                }
                Record::Conv2d { input, kernel, bias, stride, padding } => {
                    let (gi, gk, gb) = ops::conv2d_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[kernel.0].value,
                        &gout,
                        *stride,
                        *padding,
                    )?;
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *kernel, gk);
                    accumulate(&mut grads, *bias, gb);
                }
                Record::MaxPool2d { input, argmax } => {
                    let gi = ops::maxpool2d_backward(self.nodes[input.0].value.shape(), argmax, &gout);
                    accumulate(&mut grads, *input, gi);
                }
                Record::BatchNorm { input, gamma, beta, saved } => {
                    let (gi, gg, gb) = ops::batchnorm2d_backward(&gout, saved, &self.nodes[gamma.0].value)?;
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *gamma, gg);
                    accumulate(&mut grads, *beta, gb);
                }
                Record::Dense { input, weight, bias } => {
                    let (gi, gw, gb) = ops::dense_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weight.0].value,
                        &gout,
                    )?;
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *weight, gw);
                    accumulate(&mut grads, *bias, gb);
                }
                Record::Activation { input, kind } => {
                    let gi = ops::activation_backward(&self.nodes[input.0].value, &gout, *kind);
                    accumulate(&mut grads, *input, gi);
                }
                Record::UnitClamp { input } => {
                    let gi = ops::unit_clamp_backward(&self.nodes[input.0].value, &gout);
                    accumulate(&mut grads, *input, gi);
                }
                Record::Scale { input, factor } => {
                    let gi = ops::scale(&gout, *factor);
                    accumulate(&mut grads, *input, gi);
                }
                Record::Add { a, b } => {
                    accumulate(&mut grads, *a, gout.clone());
                    accumulate(&mut grads, *b, gout);
                }
                Record::Reshape { input } => {
                    let shape = self.nodes[input.0].value.shape().to_vec();
                    let gi = gout.reshaped(shape)?;
                    accumulate(&mut grads, *input, gi);
                }
                Record::GlobalAvgPool { input } => {
                    let gi = ops::global_avg_pool_backward(self.nodes[input.0].value.shape(), &gout);
                    accumulate(&mut grads, *input, gi);
                }
                Record::Upsample2x { input } => {
                    let gi = ops::upsample_nearest_2x_backward(self.nodes[input.0].value.shape(), &gout);
                    accumulate(&mut grads, *input, gi);
                }
                Record::ConcatChannels { inputs } => {
                    let shapes: Vec<Vec<usize>> =
                        inputs.iter().map(|id| self.nodes[id.0].value.shape().to_vec()).collect();
                    let parts = ops::concat_channels_backward(&shapes, &gout);
                    for (id, part) in inputs.clone().into_iter().zip(parts) {
                        accumulate(&mut grads, id, part);
                    }
                }
                Record::SoftmaxCrossEntropy { logits, labels, probs } => {
                    let upstream = gout.item()?;
                    let gi = ops::softmax_cross_entropy_backward(probs, labels, upstream);
                    accumulate(&mut grads, *logits, gi);
                }
                Record::Mse { input, target } => {
                    let upstream = gout.item()?;
                    let gi = ops::mse_loss_backward(&self.nodes[input.0].value, target, upstream);
                    accumulate(&mut grads, *input, gi);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], id: NodeId, g: Tensor<T>) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_scaled(&g, T::ONE),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut tape = Tape::<f32>::new();
        assert!(matches!(tape.backward(NodeId(0)), Err(Error::State(_))));
        let leaf = tape.leaf(Tensor::scalar(1.0));
        assert!(matches!(tape.backward(leaf), Err(Error::State(_))));
    }

    #[test]
    fn dense_identity_gradient_is_ones() {
        // loss = sum(dense(x, I, 0)) via mse against x - ... use a direct
        // construction: loss = mse(y, 0) has gradient 2y/n; instead use
        // softmax-free path: sum == dense with all-ones weight to scalar.
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let eye = tape.leaf(Tensor::new(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap());
        let b = tape.leaf(Tensor::zeros(vec![3]));
        let y = tape.dense(x, eye, b).unwrap();
        // reduce to scalar with an all-ones dense row
        let ones = tape.leaf(Tensor::filled(vec![1, 3], 1.0));
        let b1 = tape.leaf(Tensor::zeros(vec![1]));
        let s = tape.dense(y, ones, b1).unwrap();
        let mut grads = tape.backward(s).unwrap();
        let gx = grads.take(x, &[1, 3]);
        assert_eq!(gx.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn relu_gradient_zero_in_dead_region() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::new(vec![1, 1], vec![-1.0]).unwrap());
        let y = tape.activation(x, Act::Relu);
        let ones = tape.leaf(Tensor::filled(vec![1, 1], 1.0));
        let b1 = tape.leaf(Tensor::zeros(vec![1]));
        let s = tape.dense(y, ones, b1).unwrap();
        let mut grads = tape.backward(s).unwrap();
        assert_eq!(grads.take(x, &[1, 1]).data(), &[0.0]);
    }

    #[test]
    fn fan_out_accumulates_once_per_use() {
        // y = x + x => dy/dx = 2
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0).reshaped(vec![1, 1]).unwrap());
        let y = tape.add(x, x).unwrap();
        let ones = tape.leaf(Tensor::filled(vec![1, 1], 1.0));
        let b1 = tape.leaf(Tensor::zeros(vec![1]));
        let s = tape.dense(y, ones, b1).unwrap();
        let mut grads = tape.backward(s).unwrap();
        assert_eq!(grads.take(x, &[1, 1]).data(), &[2.0]);
    }
}
