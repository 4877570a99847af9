//! Minority oversampling in a convolutional autoencoder's latent space:
//! encode the class, interpolate between latent neighbours, decode back
//! to images.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Sample, WaferClass};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, InputSpec, Layer, ModelGraph};
use crate::image::{preprocess, resize_bilinear, stack_batch, ImageU8};
use crate::ops::Act;
use crate::rng::{tags, Rng};
use crate::scalar::fmath;
use crate::tape::Tape;
use crate::train::minibatches;
use crate::tensor::Tensor;

/// Encoder (image -> latent vector) and mirrored decoder.
pub struct AutoencoderPair {
    pub encoder: ModelGraph<f32>,
    pub decoder: ModelGraph<f32>,
    pub latent_dim: usize,
    pub input_res: usize,
    /// Set once the pair has been optimized; synthesis refuses to run
    /// from raw initialization.
    pub trained: bool,
}

/// SMOTE interpolation parameters.
#[derive(Debug, Clone)]
pub struct SmoteSpec {
    /// Neighbour count (must stay below the population size).
    pub k: usize,
    /// Number of synthetic samples to draw.
    pub n: usize,
    pub seed: u64,
}

impl Default for SmoteSpec {
    fn default() -> Self {
        SmoteSpec { k: 5, n: 0, seed: 42 }
    }
}

/// Synthetic latents plus the indices of the two parents of each.
#[derive(Debug, Clone)]
pub struct SmoteSynthesis {
    pub vectors: Vec<Vec<f32>>,
    pub parents: Vec<(usize, usize)>,
}

/// Builds the pair: four stride-2 conv blocks (16/32/64/128) into a
/// dense latent head; the decoder mirrors with nearest-neighbour 2x
/// upsampling and clamps its output to [0, 1].
pub fn build_autoencoder(latent_dim: usize, input_res: usize, seed: u64) -> Result<AutoencoderPair> {
    if input_res < 16 || input_res % 16 != 0 {
        return Err(Error::Config(format!(
            "autoencoder resolution must be a multiple of 16, got {input_res}"
        )));
    }
    if latent_dim < 1 {
        return Err(Error::Config("latent dimension must be positive".into()));
    }
    let bottleneck = input_res / 16;
    let flat = 128 * bottleneck * bottleneck;

    let mut eb = GraphBuilder::<f32>::new(Rng::stream(seed, tags::INIT, 0xE11C, 0));
    let enc_layers = vec![
        eb.conv("enc1", 1, 16, 4, 2, 1),
        Layer::Activation(Act::Relu),
        eb.conv("enc2", 16, 32, 4, 2, 1),
        Layer::Activation(Act::Relu),
        eb.conv("enc3", 32, 64, 4, 2, 1),
        Layer::Activation(Act::Relu),
        eb.conv("enc4", 64, 128, 4, 2, 1),
        Layer::Activation(Act::Relu),
        Layer::Flatten,
        eb.dense("enc_head", flat, latent_dim),
    ];
    let encoder = ModelGraph::from_parts(
        "encoder".into(),
        InputSpec::Image { channels: 1, res: input_res },
        latent_dim,
        enc_layers,
        eb.params,
    );

    let mut db = GraphBuilder::<f32>::new(Rng::stream(seed, tags::INIT, 0xDEC0, 0));
    let dec_layers = vec![
        db.dense("dec_head", latent_dim, flat),
        Layer::Activation(Act::Relu),
        Layer::ReshapeTo { c: 128, h: bottleneck, w: bottleneck },
        Layer::Upsample2x,
        db.conv("dec1", 128, 64, 3, 1, 1),
        Layer::Activation(Act::Relu),
        Layer::Upsample2x,
        db.conv("dec2", 64, 32, 3, 1, 1),
        Layer::Activation(Act::Relu),
        Layer::Upsample2x,
        db.conv("dec3", 32, 16, 3, 1, 1),
        Layer::Activation(Act::Relu),
        Layer::Upsample2x,
        db.conv("dec4", 16, 16, 3, 1, 1),
        Layer::Activation(Act::Relu),
        db.conv("dec_out", 16, 1, 3, 1, 1),
        Layer::UnitClamp,
    ];
    let decoder = ModelGraph::from_parts(
        "decoder".into(),
        InputSpec::Vector { dim: latent_dim },
        input_res * input_res,
        dec_layers,
        db.params,
    );

    Ok(AutoencoderPair { encoder, decoder, latent_dim, input_res, trained: false })
}

fn images_to_batch(images: &[&ImageU8], res: usize) -> Result<Tensor<f32>> {
    let tensors: Result<Vec<_>> = images.iter().map(|img| preprocess(img, res, false, None)).collect();
    stack_batch(&tensors?)
}

/// Optimizes reconstruction MSE with Adam; returns the pair and the
/// per-epoch loss trace (index 0 is the pre-training loss).
pub fn train_autoencoder(
    images: &[ImageU8],
    input_res: usize,
    latent_dim: usize,
    epochs: usize,
    lr: f32,
    seed: u64,
) -> Result<(AutoencoderPair, Vec<f64>)> {
    if images.len() < 8 {
        return Err(Error::Config(format!(
            "autoencoder training needs at least 8 images, got {}",
            images.len()
        )));
    }
    let mut pair = build_autoencoder(latent_dim, input_res, seed)?;
    let refs: Vec<&ImageU8> = images.iter().collect();

    let reconstruction_loss = |pair: &AutoencoderPair| -> Result<f64> {
        let mut total = 0f64;
        for chunk in refs.chunks(32) {
            let x = images_to_batch(chunk, input_res)?;
            let z = pair.encoder.forward_eval(&x)?;
            let y = pair.decoder.forward_eval(&z)?;
            let loss = crate::ops::mse_loss(&y, &x)?;
            total += loss as f64 * chunk.len() as f64;
        }
        Ok(total / refs.len() as f64)
    };

    let mut losses = vec![reconstruction_loss(&pair)?];

    // two optimizers, one per graph
    let mut enc_opt = crate::train::AdamState::new(&pair.encoder);
    let mut dec_opt = crate::train::AdamState::new(&pair.decoder);

    for epoch in 0..epochs {
        let batches = minibatches(images.len(), 32, epoch, seed);
        let mut epoch_loss = 0f64;
        for (bi, batch) in batches.iter().enumerate() {
            let imgs: Vec<&ImageU8> = batch.iter().map(|&i| &images[i]).collect();
            let x = images_to_batch(&imgs, input_res)?;
            let mut tape = Tape::new();
            let input = tape.leaf(x.clone());
            let enc_pass = pair.encoder.forward_train_from(&mut tape, input)?;
            let dec_pass = pair.decoder.forward_train_from(&mut tape, enc_pass.output)?;
            let loss_node = tape.mse_loss(dec_pass.output, x)?;
            let loss = tape.value(loss_node).item()? as f64;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, batch: bi, msg: "autoencoder loss diverged".into() });
            }
            epoch_loss += loss * batch.len() as f64;
            let mut grads = tape.backward(loss_node)?;
            pair.encoder.zero_grads();
            pair.decoder.zero_grads();
            pair.encoder.accumulate_grads(&enc_pass, &mut grads);
            pair.decoder.accumulate_grads(&dec_pass, &mut grads);
            enc_opt.step(&mut pair.encoder, lr, 0.0)?;
            dec_opt.step(&mut pair.decoder, lr, 0.0)?;
        }
        losses.push(epoch_loss / images.len() as f64);
    }
    if epochs > 0 {
        let initial = losses[0];
        let last = *losses.last().unwrap();
        if !(last < initial) {
            return Err(Error::Training {
                epoch: epochs,
                batch: 0,
                msg: format!("reconstruction loss did not improve: {initial} -> {last}"),
            });
        }
        pair.trained = true;
    }
    Ok((pair, losses))
}

/// Indices of the k nearest neighbours of `query` (excluding itself),
/// ties broken toward the lower index.
fn knn(latents: &[Vec<f32>], query: usize, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = latents
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query)
        .map(|(i, z)| {
            let d: f64 = z
                .iter()
                .zip(&latents[query])
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum();
            (d, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Draws `spec.n` synthetic latents: z = z_i + lambda * (z_nn - z_i)
/// with z_i uniform over the population, z_nn uniform over its k nearest
/// neighbours and lambda uniform in [0, 1].
pub fn smote_latent(latents: &[Vec<f32>], spec: &SmoteSpec) -> Result<SmoteSynthesis> {
    if spec.k < 1 {
        return Err(Error::Spec("k must be at least 1".into()));
    }
    if spec.k >= latents.len() {
        return Err(Error::Spec(format!(
            "k = {} must be below the population size {}",
            spec.k,
            latents.len()
        )));
    }
    let mut rng = Rng::stream(spec.seed, tags::SMOTE, latents.len() as u64, spec.k as u64);
    let mut vectors = Vec::with_capacity(spec.n);
    let mut parents = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let i = rng.below(latents.len());
        let neighbours = knn(latents, i, spec.k);
        let nn = neighbours[rng.below(spec.k)];
        let lambda = rng.f32();
        let z: Vec<f32> = latents[i]
            .iter()
            .zip(&latents[nn])
            .map(|(&a, &b)| a + lambda * (b - a))
            .collect();
        vectors.push(z);
        parents.push((i, nn));
    }
    Ok(SmoteSynthesis { vectors, parents })
}

/// Brute-force all-pairs kNN (exposed for oracle comparison in tests).
pub fn knn_bruteforce(latents: &[Vec<f32>], query: usize, k: usize) -> Vec<usize> {
    knn(latents, query, k)
}

/// Encodes a class, synthesizes latents up to `target_count`, decodes
/// them and appends the new samples.
pub fn oversample_deepsmote(
    mut ds: Dataset,
    class: WaferClass,
    target_count: usize,
    pair: &AutoencoderPair,
    k: usize,
    seed: u64,
) -> Result<Dataset> {
    if !pair.trained {
        return Err(Error::State("autoencoder pair is untrained (initialization state)".into()));
    }
    let label = ds
        .label_of(class.name())
        .ok_or_else(|| Error::Config(format!("class '{}' not in dataset", class.name())))?;
    let members: Vec<usize> = ds
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == label)
        .map(|(i, _)| i)
        .collect();
    let need = target_count.saturating_sub(members.len());
    if need == 0 {
        return Ok(ds);
    }
    let out_size = ds.samples[members[0]].image.height();

    // encode the class population
    let mut latents: Vec<Vec<f32>> = Vec::with_capacity(members.len());
    for chunk in members.chunks(32) {
        let imgs: Vec<&ImageU8> = chunk.iter().map(|&i| &ds.samples[i].image).collect();
        let x = images_to_batch(&imgs, pair.input_res)?;
        let z = pair.encoder.forward_eval(&x)?;
        let (rows, dim) = z.dims2()?;
        for r in 0..rows {
            latents.push(z.data()[r * dim..(r + 1) * dim].to_vec());
        }
    }

    let synth = smote_latent(&latents, &SmoteSpec { k, n: need, seed })?;

    // decode and append
    for (j, chunk) in synth.vectors.chunks(32).enumerate() {
        let mut z = Tensor::zeros(vec![chunk.len(), pair.latent_dim]);
        for (r, vec_z) in chunk.iter().enumerate() {
            z.data_mut()[r * pair.latent_dim..(r + 1) * pair.latent_dim].copy_from_slice(vec_z);
        }
        let decoded = pair.decoder.forward_eval(&z)?;
        let (rows, _, h, w) = decoded.dims4()?;
        for r in 0..rows {
            let plane = &decoded.data()[r * h * w..(r + 1) * h * w];
            let px: Vec<u8> = plane
                .iter()
                .map(|&v| fmath::round(v.clamp(0.0, 1.0) * 255.0) as u8)
                .collect();
            let img = ImageU8::new(h, w, px)?;
            let img = if out_size != h { resize_bilinear(&img, out_size, out_size) } else { img };
            ds.samples.push(Sample {
                id: format!("deepsmote_{}_{:05}", class.name(), j * 32 + r),
                image: img,
                label,
            });
        }
    }
    Ok(ds)
}
