//! Model zoo: the small from-scratch CNNs plus canonical VGG16.
//!
//! A [`ModelGraph`] is an ordered layer description over a flat parameter
//! store. The same description drives the eval-mode forward pass (pure,
//! no tape) and the train-mode forward pass (recorded on a [`Tape`]).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{self, Act};
use crate::rng::{tags, Rng};
use crate::scalar::Scalar;
use crate::tape::{Gradients, NodeId, Tape};
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// The architectures of the experiment table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchId {
    BaseNet,
    BaseNet8,
    BaseNet8Plus,
    IncNet,
    ResiNet,
    Vgg16,
}

impl ArchId {
    pub const ALL: [ArchId; 6] = [
        ArchId::BaseNet,
        ArchId::BaseNet8,
        ArchId::BaseNet8Plus,
        ArchId::IncNet,
        ArchId::ResiNet,
        ArchId::Vgg16,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ArchId::BaseNet => "basenet",
            ArchId::BaseNet8 => "basenet8",
            ArchId::BaseNet8Plus => "basenet8plus",
            ArchId::IncNet => "incnet",
            ArchId::ResiNet => "resinet",
            ArchId::Vgg16 => "vgg16",
        }
    }

    pub fn parse(s: &str) -> Result<ArchId> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "basenet" => Ok(ArchId::BaseNet),
            "basenet8" => Ok(ArchId::BaseNet8),
            "basenet8plus" | "basenet8+" => Ok(ArchId::BaseNet8Plus),
            "incnet" => Ok(ArchId::IncNet),
            "resinet" => Ok(ArchId::ResiNet),
            "vgg16" => Ok(ArchId::Vgg16),
            _ => Err(Error::Parse(format!("unknown architecture '{s}'"))),
        }
    }

    /// Default input resolution for this architecture.
    pub fn default_res(&self) -> usize {
        match self {
            ArchId::Vgg16 => 224,
            _ => 256,
        }
    }

    fn code(&self) -> u64 {
        match self {
            ArchId::BaseNet => 0,
            ArchId::BaseNet8 => 1,
            ArchId::BaseNet8Plus => 2,
            ArchId::IncNet => 3,
            ArchId::ResiNet => 4,
            ArchId::Vgg16 => 5,
        }
    }
}

/// A named tensor with a gradient slot of identical shape.
#[derive(Debug, Clone)]
pub struct Parameter<T: Scalar> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub trainable: bool,
}

impl<T: Scalar> Parameter<T> {
    fn new(name: String, value: Tensor<T>, trainable: bool) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Parameter { name, value, grad, trainable }
    }
}

/// One step of a model description; parameters are indices into the
/// graph's parameter store.
#[derive(Debug, Clone)]
pub enum Layer {
    Conv { weight: usize, bias: usize, stride: usize, padding: usize },
    BatchNorm { gamma: usize, beta: usize, running_mean: usize, running_var: usize },
    Activation(Act),
    MaxPool { window: usize, stride: usize },
    Flatten,
    ReshapeTo { c: usize, h: usize, w: usize },
    Dense { weight: usize, bias: usize },
    GlobalAvgPool,
    Upsample2x,
    UnitClamp,
    Inception { paths: Vec<Vec<Layer>> },
    /// `projection` empty means identity skip.
    Residual { body: Vec<Layer>, projection: Vec<Layer> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpec {
    Image { channels: usize, res: usize },
    Vector { dim: usize },
}

#[derive(Debug, Clone)]
pub struct ModelGraph<T: Scalar = f32> {
    pub name: String,
    pub input: InputSpec,
    pub output_dim: usize,
    layers: Vec<Layer>,
    params: Vec<Parameter<T>>,
}

/// Node handles of one recorded forward pass.
pub struct TrainPass {
    pub output: NodeId,
    /// `(param index, leaf node)` for every parameter the pass touched.
    pub param_nodes: Vec<(usize, NodeId)>,
}

impl<T: Scalar> ModelGraph<T> {
    /// Builds an architecture with seeded Kaiming-uniform initialization.
    pub fn build(arch: ArchId, num_classes: usize, input_res: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        let mut b = GraphBuilder::new(Rng::stream(seed, tags::INIT, arch.code(), 0));
        let layers = match arch {
            ArchId::BaseNet => {
                if input_res < 8 || input_res % 4 != 0 {
                    return Err(Error::Config(format!(
                        "basenet needs a resolution divisible by 4 and >= 8, got {input_res}"
                    )));
                }
                let s = input_res / 4;
                vec![
                    b.conv("conv1", 1, 8, 5, 1, 2),
                    Layer::Activation(Act::Relu),
                    Layer::MaxPool { window: 2, stride: 2 },
                    b.conv("conv2", 8, 8, 5, 1, 2),
                    Layer::Activation(Act::Relu),
                    Layer::MaxPool { window: 2, stride: 2 },
                    Layer::Flatten,
                    b.dense("fc1", 8 * s * s, 256),
                    Layer::Activation(Act::Relu),
                    b.dense("fc2", 256, num_classes),
                ]
            }
            ArchId::BaseNet8 | ArchId::BaseNet8Plus => {
                if input_res < 8 || input_res % 4 != 0 {
                    return Err(Error::Config(format!(
                        "{} needs a resolution divisible by 4 and >= 8, got {input_res}",
                        arch.name()
                    )));
                }
                let with_bn = arch == ArchId::BaseNet8Plus;
                let act = if with_bn { Act::Relu6 } else { Act::Relu };
                let widths = [8usize, 16, 32, 64, 128, 256, 512, 512];
                let mut layers = Vec::new();
                let mut cin = 1;
                let mut s = input_res;
                for (i, &cout) in widths.iter().enumerate() {
                    layers.push(b.conv(&format!("conv{}", i + 1), cin, cout, 3, 1, 1));
                    if with_bn {
                        layers.push(b.bn(&format!("bn{}", i + 1), cout));
                    }
                    layers.push(Layer::Activation(act));
                    if s >= 2 && s % 2 == 0 {
                        layers.push(Layer::MaxPool { window: 2, stride: 2 });
                        s /= 2;
                    }
                    cin = cout;
                }
                layers.push(Layer::Flatten);
                layers.push(b.dense("fc1", 512 * s * s, 256));
                layers.push(Layer::Activation(act));
                layers.push(b.dense("fc2", 256, num_classes));
                layers
            }
            ArchId::IncNet => {
                if input_res < 16 || input_res % 16 != 0 {
                    return Err(Error::Config(format!(
                        "incnet needs a resolution divisible by 16, got {input_res}"
                    )));
                }
                let mut layers = vec![
                    b.conv("stem", 1, 16, 3, 1, 1),
                    Layer::Activation(Act::Relu),
                    Layer::MaxPool { window: 2, stride: 2 },
                ];
                let widths = [32usize, 64, 128, 256];
                let mut cin = 16;
                for (i, &w) in widths.iter().enumerate() {
                    layers.push(b.inception_block(&format!("block{}", i + 1), cin, w));
                    if i + 1 < widths.len() {
                        layers.push(Layer::MaxPool { window: 2, stride: 2 });
                    }
                    cin = w;
                }
                layers.push(Layer::GlobalAvgPool);
                layers.push(b.dense("head", 256, num_classes));
                layers
            }
            ArchId::ResiNet => {
                if input_res < 16 || input_res % 16 != 0 {
                    return Err(Error::Config(format!(
                        "resinet needs a resolution divisible by 16, got {input_res}"
                    )));
                }
                let mut layers = vec![b.conv("stem", 1, 16, 3, 1, 1), Layer::Activation(Act::Relu)];
                let widths = [16usize, 32, 64, 128];
                let mut cin = 16;
                for (i, &w) in widths.iter().enumerate() {
                    layers.push(Layer::MaxPool { window: 2, stride: 2 });
                    layers.push(b.residual_block(&format!("block{}", i + 1), cin, w));
                    layers.push(Layer::Activation(Act::Relu));
                    cin = w;
                }
                layers.push(Layer::GlobalAvgPool);
                layers.push(b.dense("head", 128, num_classes));
                layers
            }
            ArchId::Vgg16 => {
                if input_res != 224 {
                    return Err(Error::Config(format!(
                        "vgg16 is fixed at 224x224 input, got {input_res}"
                    )));
                }
                let plan: [&[usize]; 5] = [&[64, 64], &[128, 128], &[256, 256, 256], &[512, 512, 512], &[512, 512, 512]];
                let mut layers = Vec::new();
                let mut cin = 3;
                for (bi, block) in plan.iter().enumerate() {
                    for (ci, &cout) in block.iter().enumerate() {
                        layers.push(b.conv(&format!("conv{}_{}", bi + 1, ci + 1), cin, cout, 3, 1, 1));
                        layers.push(Layer::Activation(Act::Relu));
                        cin = cout;
                    }
                    layers.push(Layer::MaxPool { window: 2, stride: 2 });
                }
                layers.push(Layer::Flatten);
                layers.push(b.dense("fc1", 512 * 7 * 7, 4096));
                layers.push(Layer::Activation(Act::Relu));
                layers.push(b.dense("fc2", 4096, 4096));
                layers.push(Layer::Activation(Act::Relu));
                layers.push(b.dense("fc3", 4096, num_classes));
                layers
            }
        };
        let channels = if arch == ArchId::Vgg16 { 3 } else { 1 };
        Ok(ModelGraph {
            name: arch.name().into(),
            input: InputSpec::Image { channels, res: input_res },
            output_dim: num_classes,
            layers,
            params: b.params,
        })
    }

    /// Assembles a graph from explicit parts (used by the autoencoder).
    pub(crate) fn from_parts(
        name: String,
        input: InputSpec,
        output_dim: usize,
        layers: Vec<Layer>,
        params: Vec<Parameter<T>>,
    ) -> Self {
        ModelGraph { name, input, output_dim, layers, params }
    }

    pub fn params(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter<T>] {
        &mut self.params
    }

    /// Sum of element counts over trainable parameters.
    pub fn count_params(&self) -> u64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.numel() as u64)
            .sum()
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        match self.input {
            InputSpec::Image { channels, res } => {
                let (_, c, h, w) = batch.dims4()?;
                if c != channels || h != res || w != res {
                    return Err(Error::Dim(format!(
                        "model '{}' expects [N,{channels},{res},{res}], got {:?}",
                        self.name,
                        batch.shape()
                    )));
                }
            }
            InputSpec::Vector { dim } => {
                let (_, f) = batch.dims2()?;
                if f != dim {
                    return Err(Error::Dim(format!(
                        "model '{}' expects [N,{dim}], got {:?}",
                        self.name,
                        batch.shape()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Eval-mode forward pass (batchnorm uses running statistics).
    pub fn forward_eval(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch)?;
        eval_layers(&self.layers, &self.params, batch.clone())
    }

    /// Train-mode forward pass recorded on `tape`. Updates batchnorm
    /// running statistics as a side effect.
    pub fn forward_train(&mut self, tape: &mut Tape<T>, batch: Tensor<T>) -> Result<TrainPass> {
        self.check_input(&batch)?;
        let input = tape.leaf(batch);
        self.forward_train_from(tape, input)
    }

    /// Train-mode forward pass from a value already on the tape, so
    /// graphs can be chained (encoder feeding decoder) with gradients
    /// flowing across the seam.
    pub fn forward_train_from(&mut self, tape: &mut Tape<T>, input: NodeId) -> Result<TrainPass> {
        self.check_input(tape.value(input))?;
        let mut param_nodes: Vec<Option<NodeId>> = vec![None; self.params.len()];
        let out = train_layers(&self.layers, &mut self.params, tape, input, &mut param_nodes)?;
        let param_nodes = param_nodes
            .into_iter()
            .enumerate()
            .filter_map(|(i, n)| n.map(|n| (i, n)))
            .collect();
        Ok(TrainPass { output: out, param_nodes })
    }

    /// Pulls gradients off a completed backward pass into the parameter
    /// gradient slots (accumulating).
    pub fn accumulate_grads(&mut self, pass: &TrainPass, grads: &mut Gradients<T>) {
        for &(idx, node) in &pass.param_nodes {
            let shape = self.params[idx].value.shape().to_vec();
            let g = grads.take(node, &shape);
            self.params[idx].grad.add_scaled(&g, T::ONE);
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::ZERO);
        }
    }

    /// Logits and argmax class per row.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let logits = self.forward_eval(batch)?;
        let (n, c) = logits.dims2()?;
        let data = logits.data();
        let mut classes = Vec::with_capacity(n);
        for row in 0..n {
            let r = &data[row * c..(row + 1) * c];
            let mut best = 0;
            for (i, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = i;
                }
            }
            classes.push(best);
        }
        Ok((logits, classes))
    }

    /// Snapshot of all parameter values (used for best-epoch restore).
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) {
        debug_assert_eq!(snapshot.len(), self.params.len());
        for (p, s) in self.params.iter_mut().zip(snapshot) {
            p.value = s.clone();
        }
    }

    /// Converts the model to another element type (f32 <-> f64).
    pub fn cast<U: Scalar>(&self) -> ModelGraph<U> {
        ModelGraph {
            name: self.name.clone(),
            input: self.input,
            output_dim: self.output_dim,
            layers: self.layers.clone(),
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                    trainable: p.trainable,
                })
                .collect(),
        }
    }
}

fn eval_layers<T: Scalar>(layers: &[Layer], params: &[Parameter<T>], mut x: Tensor<T>) -> Result<Tensor<T>> {
    for layer in layers {
        x = match layer {
            Layer::Conv { weight, bias, stride, padding } => {
                ops::conv2d(&x, &params[*weight].value, &params[*bias].value, *stride, *padding)?
            }
            Layer::BatchNorm { gamma, beta, running_mean, running_var } => ops::batchnorm2d_eval(
                &x,
                &params[*gamma].value,
                &params[*beta].value,
                &params[*running_mean].value,
                &params[*running_var].value,
                T::from_f64(BN_EPS),
            )?,
            Layer::Activation(kind) => ops::activation(&x, *kind),
            Layer::MaxPool { window, stride } => ops::maxpool2d(&x, *window, *stride)?.0,
            Layer::Flatten => {
                let (n, c, h, w) = x.dims4()?;
                x.reshaped(vec![n, c * h * w])?
            }
            Layer::ReshapeTo { c, h, w } => {
                let (n, _) = x.dims2()?;
                x.reshaped(vec![n, *c, *h, *w])?
            }
            Layer::Dense { weight, bias } => ops::dense(&x, &params[*weight].value, &params[*bias].value)?,
            Layer::GlobalAvgPool => ops::global_avg_pool(&x)?,
            Layer::Upsample2x => ops::upsample_nearest_2x(&x)?,
            Layer::UnitClamp => ops::unit_clamp(&x),
            Layer::Inception { paths } => {
                let mut outs = Vec::with_capacity(paths.len());
                for path in paths {
                    outs.push(eval_layers(path, params, x.clone())?);
                }
                let refs: Vec<&Tensor<T>> = outs.iter().collect();
                ops::concat_channels(&refs)?
            }
            Layer::Residual { body, projection } => {
                let main = eval_layers(body, params, x.clone())?;
                let skip = if projection.is_empty() {
                    x
                } else {
                    eval_layers(projection, params, x)?
                };
                ops::add(&main, &skip)?
            }
        };
    }
    Ok(x)
}

fn leaf_for<T: Scalar>(
    params: &[Parameter<T>],
    tape: &mut Tape<T>,
    nodes: &mut [Option<NodeId>],
    idx: usize,
) -> NodeId {
    if let Some(n) = nodes[idx] {
        return n;
    }
    let n = tape.leaf(params[idx].value.clone());
    nodes[idx] = Some(n);
    n
}

fn train_layers<T: Scalar>(
    layers: &[Layer],
    params: &mut [Parameter<T>],
    tape: &mut Tape<T>,
    mut x: NodeId,
    nodes: &mut Vec<Option<NodeId>>,
) -> Result<NodeId> {
    for layer in layers {
        x = match layer {
            Layer::Conv { weight, bias, stride, padding } => {
                let w = leaf_for(params, tape, nodes, *weight);
                let b = leaf_for(params, tape, nodes, *bias);
                tape.conv2d(x, w, b, *stride, *padding)?
            }
            Layer::BatchNorm { gamma, beta, running_mean, running_var } => {
                let g = leaf_for(params, tape, nodes, *gamma);
                let bt = leaf_for(params, tape, nodes, *beta);
                let (out, mean, var) = tape.batchnorm2d(x, g, bt, T::from_f64(BN_EPS))?;
                let mom = T::from_f64(BN_MOMENTUM);
                let keep = T::ONE - mom;
                for (slot, stat) in [(*running_mean, mean), (*running_var, var)] {
                    let rs = params[slot].value.data_mut();
                    for (r, s) in rs.iter_mut().zip(stat) {
                        *r = keep * *r + mom * s;
                    }
                }
                out
            }
            Layer::Activation(kind) => tape.activation(x, *kind),
            Layer::MaxPool { window, stride } => tape.maxpool2d(x, *window, *stride)?,
            Layer::Flatten => {
                let (n, c, h, w) = tape.value(x).dims4()?;
                tape.reshape(x, vec![n, c * h * w])?
            }
            Layer::ReshapeTo { c, h, w } => {
                let (n, _) = tape.value(x).dims2()?;
                tape.reshape(x, vec![n, *c, *h, *w])?
            }
            Layer::Dense { weight, bias } => {
                let w = leaf_for(params, tape, nodes, *weight);
                let b = leaf_for(params, tape, nodes, *bias);
                tape.dense(x, w, b)?
            }
            Layer::GlobalAvgPool => tape.global_avg_pool(x)?,
            Layer::Upsample2x => tape.upsample_2x(x)?,
            Layer::UnitClamp => tape.unit_clamp(x),
            Layer::Inception { paths } => {
                let mut outs = Vec::with_capacity(paths.len());
                for path in paths {
                    outs.push(train_layers(path, params, tape, x, nodes)?);
                }
                tape.concat_channels(&outs)?
            }
            Layer::Residual { body, projection } => {
                let main = train_layers(body, params, tape, x, nodes)?;
                let skip = if projection.is_empty() {
                    x
                } else {
                    train_layers(projection, params, tape, x, nodes)?
                };
                tape.add(main, skip)?
            }
        };
    }
    Ok(x)
}

/// Builds layers while appending freshly initialized parameters.
pub(crate) struct GraphBuilder<T: Scalar> {
    pub params: Vec<Parameter<T>>,
    rng: Rng,
}

impl<T: Scalar> GraphBuilder<T> {
    pub fn new(rng: Rng) -> Self {
        GraphBuilder { params: Vec::new(), rng }
    }

    fn kaiming(&mut self, shape: Vec<usize>, fan_in: usize) -> Tensor<T> {
        let bound = libm::sqrt(6.0 / fan_in as f64);
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = T::from_f64((self.rng.f64() * 2.0 - 1.0) * bound);
        }
        t
    }

    fn push(&mut self, name: String, value: Tensor<T>, trainable: bool) -> usize {
        debug_assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        self.params.push(Parameter::new(name, value, trainable));
        self.params.len() - 1
    }

    pub fn conv(&mut self, prefix: &str, cin: usize, cout: usize, k: usize, stride: usize, padding: usize) -> Layer {
        let w = self.kaiming(vec![cout, cin, k, k], cin * k * k);
        let weight = self.push(format!("{prefix}.weight"), w, true);
        let bias = self.push(format!("{prefix}.bias"), Tensor::zeros(vec![cout]), true);
        Layer::Conv { weight, bias, stride, padding }
    }

    pub fn dense(&mut self, prefix: &str, fin: usize, fout: usize) -> Layer {
        let w = self.kaiming(vec![fout, fin], fin);
        let weight = self.push(format!("{prefix}.weight"), w, true);
        let bias = self.push(format!("{prefix}.bias"), Tensor::zeros(vec![fout]), true);
        Layer::Dense { weight, bias }
    }

    pub fn bn(&mut self, prefix: &str, c: usize) -> Layer {
        let gamma = self.push(format!("{prefix}.gamma"), Tensor::filled(vec![c], T::ONE), true);
        let beta = self.push(format!("{prefix}.beta"), Tensor::zeros(vec![c]), true);
        let running_mean = self.push(format!("{prefix}.running_mean"), Tensor::zeros(vec![c]), false);
        let running_var = self.push(format!("{prefix}.running_var"), Tensor::filled(vec![c], T::ONE), false);
        Layer::BatchNorm { gamma, beta, running_mean, running_var }
    }

    /// Four parallel paths (1x1 / 3x3 / 5x5 / 9x9 then 9x9), each padded
    /// to preserve the spatial size and emitting `width/4` channels.
    fn inception_block(&mut self, prefix: &str, cin: usize, width: usize) -> Layer {
        let p = width / 4;
        let paths = vec![
            vec![
                self.conv(&format!("{prefix}.p1"), cin, p, 1, 1, 0),
                Layer::Activation(Act::Relu),
            ],
            vec![
                self.conv(&format!("{prefix}.p2"), cin, p, 3, 1, 1),
                Layer::Activation(Act::Relu),
            ],
            vec![
                self.conv(&format!("{prefix}.p3"), cin, p, 5, 1, 2),
                Layer::Activation(Act::Relu),
            ],
            vec![
                self.conv(&format!("{prefix}.p4a"), cin, p, 9, 1, 4),
                Layer::Activation(Act::Relu),
                self.conv(&format!("{prefix}.p4b"), p, p, 9, 1, 4),
                Layer::Activation(Act::Relu),
            ],
        ];
        Layer::Inception { paths }
    }

    /// Two serial 3x3 convolutions plus a skip; a 1x1 projection is added
    /// when the width changes. Spatial downsampling happens in the pool
    /// preceding the block, so both paths see the same resolution.
    fn residual_block(&mut self, prefix: &str, cin: usize, width: usize) -> Layer {
        let body = vec![
            self.conv(&format!("{prefix}.conv1"), cin, width, 3, 1, 1),
            Layer::Activation(Act::Relu),
            self.conv(&format!("{prefix}.conv2"), width, width, 3, 1, 1),
        ];
        let projection = if cin == width {
            Vec::new()
        } else {
            vec![self.conv(&format!("{prefix}.proj"), cin, width, 1, 1, 0)]
        };
        Layer::Residual { body, projection }
    }
}

/// Builds a plain residual block (used directly by tests).
pub fn residual_block_graph<T: Scalar>(channels: usize, res: usize, seed: u64) -> ModelGraph<T> {
    let mut b = GraphBuilder::new(Rng::stream(seed, tags::INIT, 99, 0));
    let block = b.residual_block("block", channels, channels);
    ModelGraph::from_parts(
        "resblock".into(),
        InputSpec::Image { channels, res },
        channels,
        vec![block],
        b.params,
    )
}
