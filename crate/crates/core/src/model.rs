//! A small U-shaped encoder–decoder with three heads sharing one trunk:
//! a 2-class segmentation head (its foreground channel is `p`), a 3-class
//! per-pixel classification head, and an L2-normalized pixel embedding
//! head. The classification and embedding heads are training-time
//! auxiliaries; inference needs only the trunk and the segmentation head.
//!
//! Forward and backward passes are hand-written over flat buffers and run
//! per sample, which keeps batch parallelism trivial and bitwise
//! deterministic (per-sample gradients are reduced in index order).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{f, s, Scalar};
use crate::tensor::{Field, Tensor3};

/// Network hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    /// Input image channels.
    pub in_channels: usize,
    /// Channels at full resolution; level i uses `base_channels << i`.
    pub base_channels: usize,
    /// Number of resolution levels (level count; `depth - 1` poolings).
    pub depth: usize,
    /// Embedding head output dimension.
    pub embed_dim: usize,
    /// Parameter initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            in_channels: 3,
            base_channels: 16,
            depth: 3,
            embed_dim: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_channels == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidConfig(
                "channel counts must be positive".into(),
            ));
        }
        if self.depth == 0 || self.depth > 6 {
            return Err(Error::InvalidConfig("depth must be in 1..=6".into()));
        }
        Ok(())
    }

    fn level_channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

// ---------------------------------------------------------------------------
// Conv layer
// ---------------------------------------------------------------------------

/// 2-D convolution with odd kernel size and same-padding.
#[derive(Debug, Clone)]
pub struct Conv2d<S> {
    pub ci: usize,
    pub co: usize,
    pub k: usize,
    /// Weights laid out [co][ci][ky][kx].
    pub w: Vec<S>,
    pub b: Vec<S>,
}

/// Gradient buffers matching one [`Conv2d`].
#[derive(Debug, Clone)]
pub struct ConvGrads<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
}

#[inline]
fn shift_ranges(h: usize, w: usize, dy: i64, dx: i64) -> (usize, usize, usize, usize) {
    let y0 = (-dy).max(0) as usize;
    let y1 = h - dy.max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = w - dx.max(0) as usize;
    (y0, y1, x0, x1)
}

impl<S: Scalar> Conv2d<S> {
    fn init(ci: usize, co: usize, k: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (ci * k * k) as f64;
        let limit = (6.0 / fan_in).sqrt();
        let w = (0..co * ci * k * k)
            .map(|_| s::<S>(rng.gen_range(-limit..limit)))
            .collect();
        let b = vec![S::zero(); co];
        Conv2d { ci, co, k, w, b }
    }

    fn zero_grads(&self) -> ConvGrads<S> {
        ConvGrads {
            w: vec![S::zero(); self.w.len()],
            b: vec![S::zero(); self.b.len()],
        }
    }

    pub fn forward(&self, x: &Tensor3<S>) -> Tensor3<S> {
        debug_assert_eq!(x.c, self.ci);
        let (h, w) = (x.h, x.w);
        let p = (self.k / 2) as i64;
        let mut out = Tensor3::zeros(self.co, h, w);
        for co in 0..self.co {
            out.plane_mut(co).fill(self.b[co]);
        }
        for co in 0..self.co {
            for ci in 0..self.ci {
                let xin = x.plane(ci);
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wv = self.w[((co * self.ci + ci) * self.k + ky) * self.k + kx];
                        let (dy, dx) = (ky as i64 - p, kx as i64 - p);
                        let (y0, y1, x0, x1) = shift_ranges(h, w, dy, dx);
                        let oplane = out.plane_mut(co);
                        for y in y0..y1 {
                            let iy = (y as i64 + dy) as usize;
                            let orow = &mut oplane[y * w + x0..y * w + x1];
                            let irow = &xin[iy * w + (x0 as i64 + dx) as usize
                                ..iy * w + (x1 as i64 + dx) as usize];
                            for (o, &v) in orow.iter_mut().zip(irow) {
                                *o += wv * v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Backward pass; returns the input gradient and fills `g`.
    pub fn backward(&self, x: &Tensor3<S>, gout: &Tensor3<S>, g: &mut ConvGrads<S>) -> Tensor3<S> {
        let (h, w) = (x.h, x.w);
        let p = (self.k / 2) as i64;
        let mut gin = Tensor3::zeros(self.ci, h, w);
        for co in 0..self.co {
            let gplane = gout.plane(co);
            g.b[co] += gplane.iter().copied().sum();
            for ci in 0..self.ci {
                let xin = x.plane(ci);
                let giplane = gin.plane_mut(ci);
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let widx = ((co * self.ci + ci) * self.k + ky) * self.k + kx;
                        let wv = self.w[widx];
                        let (dy, dx) = (ky as i64 - p, kx as i64 - p);
                        let (y0, y1, x0, x1) = shift_ranges(h, w, dy, dx);
                        let mut wg = S::zero();
                        for y in y0..y1 {
                            let iy = (y as i64 + dy) as usize;
                            let grow = &gplane[y * w + x0..y * w + x1];
                            let ix0 = (x0 as i64 + dx) as usize;
                            let ix1 = (x1 as i64 + dx) as usize;
                            let irow = &xin[iy * w + ix0..iy * w + ix1];
                            let girow = &mut giplane[iy * w + ix0..iy * w + ix1];
                            for ((gi, &go), &v) in girow.iter_mut().zip(grow).zip(irow) {
                                *gi += wv * go;
                                wg += go * v;
                            }
                        }
                        g.w[widx] += wg;
                    }
                }
            }
        }
        gin
    }
}

// ---------------------------------------------------------------------------
// Elementwise / spatial ops
// ---------------------------------------------------------------------------

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// SiLU activation x·σ(x); smooth, so finite-difference checks stay clean.
fn silu<S: Scalar>(z: &Tensor3<S>) -> Tensor3<S> {
    let mut out = z.clone();
    for v in &mut out.data {
        *v = *v * sigmoid(*v);
    }
    out
}

fn silu_backward<S: Scalar>(z: &Tensor3<S>, gout: &Tensor3<S>) -> Tensor3<S> {
    let mut gin = gout.clone();
    for (g, &x) in gin.data.iter_mut().zip(&z.data) {
        let sg = sigmoid(x);
        *g = *g * (sg * (S::one() + x * (S::one() - sg)));
    }
    gin
}

fn avg_pool2<S: Scalar>(x: &Tensor3<S>) -> Tensor3<S> {
    let (h2, w2) = (x.h / 2, x.w / 2);
    let quarter = s::<S>(0.25);
    let mut out = Tensor3::zeros(x.c, h2, w2);
    for c in 0..x.c {
        let xin = x.plane(c);
        let op = out.plane_mut(c);
        for y in 0..h2 {
            for xx in 0..w2 {
                let i = 2 * y * x.w + 2 * xx;
                op[y * w2 + xx] =
                    (xin[i] + xin[i + 1] + xin[i + x.w] + xin[i + x.w + 1]) * quarter;
            }
        }
    }
    out
}

fn avg_pool2_backward<S: Scalar>(gout: &Tensor3<S>, h: usize, w: usize) -> Tensor3<S> {
    let quarter = s::<S>(0.25);
    let mut gin = Tensor3::zeros(gout.c, h, w);
    for c in 0..gout.c {
        let gp = gout.plane(c);
        let gi = gin.plane_mut(c);
        for y in 0..gout.h {
            for x in 0..gout.w {
                let g = gp[y * gout.w + x] * quarter;
                let i = 2 * y * w + 2 * x;
                gi[i] += g;
                gi[i + 1] += g;
                gi[i + w] += g;
                gi[i + w + 1] += g;
            }
        }
    }
    gin
}

fn upsample2<S: Scalar>(x: &Tensor3<S>) -> Tensor3<S> {
    let (h2, w2) = (x.h * 2, x.w * 2);
    let mut out = Tensor3::zeros(x.c, h2, w2);
    for c in 0..x.c {
        let xin = x.plane(c);
        let op = out.plane_mut(c);
        for y in 0..h2 {
            for xx in 0..w2 {
                op[y * w2 + xx] = xin[(y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

fn upsample2_backward<S: Scalar>(gout: &Tensor3<S>) -> Tensor3<S> {
    let (h, w) = (gout.h / 2, gout.w / 2);
    let mut gin = Tensor3::zeros(gout.c, h, w);
    for c in 0..gout.c {
        let gp = gout.plane(c);
        let gi = gin.plane_mut(c);
        for y in 0..gout.h {
            for x in 0..gout.w {
                gi[(y / 2) * w + x / 2] += gp[y * gout.w + x];
            }
        }
    }
    gin
}

fn concat<S: Scalar>(a: &Tensor3<S>, b: &Tensor3<S>) -> Tensor3<S> {
    debug_assert_eq!((a.h, a.w), (b.h, b.w));
    let mut data = Vec::with_capacity((a.c + b.c) * a.h * a.w);
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor3 {
        c: a.c + b.c,
        h: a.h,
        w: a.w,
        data,
    }
}

fn split<S: Scalar>(g: &Tensor3<S>, ca: usize) -> (Tensor3<S>, Tensor3<S>) {
    let n = g.h * g.w;
    let a = Tensor3 {
        c: ca,
        h: g.h,
        w: g.w,
        data: g.data[..ca * n].to_vec(),
    };
    let b = Tensor3 {
        c: g.c - ca,
        h: g.h,
        w: g.w,
        data: g.data[ca * n..].to_vec(),
    };
    (a, b)
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct ConvBlock<S> {
    c1: Conv2d<S>,
    c2: Conv2d<S>,
}

impl<S: Scalar> ConvBlock<S> {
    fn init(ci: usize, co: usize, rng: &mut ChaCha8Rng) -> Self {
        ConvBlock {
            c1: Conv2d::init(ci, co, 3, rng),
            c2: Conv2d::init(co, co, 3, rng),
        }
    }

    fn forward(&self, x: &Tensor3<S>) -> BlockCache<S> {
        let z1 = self.c1.forward(x);
        let a1 = silu(&z1);
        let z2 = self.c2.forward(&a1);
        let a2 = silu(&z2);
        BlockCache {
            x: x.clone(),
            z1,
            a1,
            z2,
            out: a2,
        }
    }

    fn backward(
        &self,
        cache: &BlockCache<S>,
        gout: &Tensor3<S>,
        g1: &mut ConvGrads<S>,
        g2: &mut ConvGrads<S>,
    ) -> Tensor3<S> {
        let gz2 = silu_backward(&cache.z2, gout);
        let ga1 = self.c2.backward(&cache.a1, &gz2, g2);
        let gz1 = silu_backward(&cache.z1, &ga1);
        self.c1.backward(&cache.x, &gz1, g1)
    }
}

#[derive(Debug, Clone)]
struct BlockCache<S> {
    x: Tensor3<S>,
    z1: Tensor3<S>,
    a1: Tensor3<S>,
    z2: Tensor3<S>,
    out: Tensor3<S>,
}

/// The network. Build with [`build_model`]; run with [`Model::forward_batch`]
/// or per sample with [`Model::forward_sample`].
#[derive(Debug, Clone)]
pub struct Model<S> {
    pub config: ModelConfig,
    enc: Vec<ConvBlock<S>>,
    dec: Vec<ConvBlock<S>>,
    seg_head: Conv2d<S>,
    cls_head: Conv2d<S>,
    emb_head: Conv2d<S>,
}

/// Gradients for every parameter tensor, in canonical layer order.
#[derive(Debug, Clone)]
pub struct ModelGrads<S> {
    pub layers: Vec<ConvGrads<S>>,
}

impl<S: Scalar> ModelGrads<S> {
    pub fn add_assign(&mut self, other: &ModelGrads<S>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in a.w.iter_mut().zip(&b.w) {
                *x += y;
            }
            for (x, &y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for l in &mut self.layers {
            for v in &mut l.w {
                *v *= factor;
            }
            for v in &mut l.b {
                *v *= factor;
            }
        }
    }
}

/// Per-sample head outputs.
#[derive(Debug, Clone)]
pub struct SampleOutputs<S> {
    /// Foreground probability, (H, W).
    pub p: Field<S>,
    /// Per-pixel 3-class probabilities, (3, H, W); rows sum to 1.
    pub cls: Tensor3<S>,
    /// L2-normalized pixel embeddings, (E, H, W).
    pub embed: Tensor3<S>,
}

/// Batch outputs, one entry per input image.
#[derive(Debug, Clone)]
pub struct ModelOutputs<S> {
    pub samples: Vec<SampleOutputs<S>>,
}

impl<S: Scalar> ModelOutputs<S> {
    /// Checks the output invariants: p in [0,1] and class rows on the
    /// simplex within 1e-5.
    pub fn validate(&self) -> Result<()> {
        for (i, sample) in self.samples.iter().enumerate() {
            if sample.p.data.iter().any(|&v| v < S::zero() || v > S::one()) {
                return Err(Error::shape_mismatch(
                    "model.forward",
                    format!("sample {i}: p outside [0,1]"),
                ));
            }
            let n = sample.cls.h * sample.cls.w;
            for px in 0..n {
                let total: f64 = (0..3).map(|c| f(sample.cls.data[c * n + px])).sum();
                if (total - 1.0).abs() > 1e-5 {
                    return Err(Error::shape_mismatch(
                        "model.forward",
                        format!("sample {i}: class probabilities sum to {total}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one forward pass.
pub struct SampleCache<S> {
    enc: Vec<BlockCache<S>>,
    dec: Vec<BlockCache<S>>,
    /// Inputs to the decoder blocks (concatenated skip tensors).
    trunk: Tensor3<S>,
    seg_z: Tensor3<S>,
    p: Field<S>,
    cls_probs: Tensor3<S>,
    emb_raw: Tensor3<S>,
    emb_norm: Tensor3<S>,
}

/// Builds a model with seeded deterministic initialization.
pub fn build_model<S: Scalar>(config: &ModelConfig) -> Result<Model<S>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut enc = Vec::new();
    for level in 0..config.depth {
        let ci = if level == 0 {
            config.in_channels
        } else {
            config.level_channels(level - 1)
        };
        enc.push(ConvBlock::init(ci, config.level_channels(level), &mut rng));
    }
    let mut dec = Vec::new();
    for level in (0..config.depth.saturating_sub(1)).rev() {
        let ci = config.level_channels(level + 1) + config.level_channels(level);
        dec.push(ConvBlock::init(ci, config.level_channels(level), &mut rng));
    }
    let c0 = config.base_channels;
    let seg_head = Conv2d::init(c0, 2, 1, &mut rng);
    let cls_head = Conv2d::init(c0, 3, 1, &mut rng);
    let emb_head = Conv2d::init(c0, config.embed_dim, 1, &mut rng);
    Ok(Model {
        config: config.clone(),
        enc,
        dec,
        seg_head,
        cls_head,
        emb_head,
    })
}

impl<S: Scalar> Model<S> {
    fn layers(&self) -> Vec<&Conv2d<S>> {
        let mut v = Vec::new();
        for b in &self.enc {
            v.push(&b.c1);
            v.push(&b.c2);
        }
        for b in &self.dec {
            v.push(&b.c1);
            v.push(&b.c2);
        }
        v.push(&self.seg_head);
        v.push(&self.cls_head);
        v.push(&self.emb_head);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut Conv2d<S>> {
        let mut v: Vec<&mut Conv2d<S>> = Vec::new();
        for b in &mut self.enc {
            v.push(&mut b.c1);
            v.push(&mut b.c2);
        }
        for b in &mut self.dec {
            v.push(&mut b.c1);
            v.push(&mut b.c2);
        }
        v.push(&mut self.seg_head);
        v.push(&mut self.cls_head);
        v.push(&mut self.emb_head);
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// FNV-1a over the parameter bit patterns, in canonical order.
    pub fn param_checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut feed = |v: f64| {
            for byte in v.to_bits().to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        };
        for layer in self.layers() {
            for &v in layer.w.iter().chain(&layer.b) {
                feed(f(v));
            }
        }
        hash
    }

    /// Flattens parameters to f64 in canonical order (checkpointing).
    pub fn export_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            out.extend(layer.w.iter().map(|&v| f(v)));
            out.extend(layer.b.iter().map(|&v| f(v)));
        }
        out
    }

    pub fn import_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Checkpoint(format!(
                "parameter count mismatch: file has {}, model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut it = params.iter();
        for layer in self.layers_mut() {
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = s(*it.next().unwrap());
            }
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> ModelGrads<S> {
        ModelGrads {
            layers: self.layers().iter().map(|l| l.zero_grads()).collect(),
        }
    }

    /// Applies `update(param, grad)` over every parameter in canonical
    /// order together with optimizer state kept by the caller.
    pub fn update_params(&mut self, grads: &ModelGrads<S>, mut update: impl FnMut(&mut S, S)) {
        for (layer, g) in self.layers_mut().into_iter().zip(&grads.layers) {
            for (p, &gv) in layer.w.iter_mut().zip(&g.w) {
                update(p, gv);
            }
            for (p, &gv) in layer.b.iter_mut().zip(&g.b) {
                update(p, gv);
            }
        }
    }

    fn check_input(&self, x: &Tensor3<S>) -> Result<()> {
        if x.c != self.config.in_channels {
            return Err(Error::shape_mismatch(
                "model.forward",
                format!("expected {} channels, got {}", self.config.in_channels, x.c),
            ));
        }
        let div = 1usize << self.config.depth;
        if x.h % div != 0 || x.w % div != 0 {
            return Err(Error::shape_mismatch(
                "model.forward",
                format!("H and W must be divisible by {div}, got {}x{}", x.h, x.w),
            ));
        }
        Ok(())
    }

    /// Runs the trunk; shared by full forward and inference-only forward.
    fn forward_trunk(&self, x: &Tensor3<S>) -> (Vec<BlockCache<S>>, Vec<BlockCache<S>>) {
        let mut enc_caches = Vec::with_capacity(self.enc.len());
        let mut feat = x.clone();
        for (i, block) in self.enc.iter().enumerate() {
            let input = if i == 0 { feat.clone() } else { avg_pool2(&feat) };
            let cache = block.forward(&input);
            feat = cache.out.clone();
            enc_caches.push(cache);
        }
        let mut dec_caches = Vec::with_capacity(self.dec.len());
        let mut deep = feat;
        for (j, block) in self.dec.iter().enumerate() {
            let skip_level = self.enc.len() - 2 - j;
            let up = upsample2(&deep);
            let cat = concat(&up, &enc_caches[skip_level].out);
            let cache = block.forward(&cat);
            deep = cache.out.clone();
            dec_caches.push(cache);
        }
        (enc_caches, dec_caches)
    }

    /// Full forward for one image: all three heads plus the backward cache.
    pub fn forward_sample(&self, x: &Tensor3<S>) -> Result<(SampleOutputs<S>, SampleCache<S>)> {
        self.check_input(x)?;
        let (enc_caches, dec_caches) = self.forward_trunk(x);
        let trunk = if let Some(last) = dec_caches.last() {
            last.out.clone()
        } else {
            enc_caches.last().unwrap().out.clone()
        };
        let (h, w) = (trunk.h, trunk.w);
        let n = h * w;

        // Segmentation head: 2-class softmax, p = foreground channel.
        let seg_z = self.seg_head.forward(&trunk);
        let mut p = Field::zeros(h, w);
        for i in 0..n {
            p.data[i] = sigmoid(seg_z.data[n + i] - seg_z.data[i]);
        }

        // Classification head: 3-class softmax.
        let cls_z = self.cls_head.forward(&trunk);
        let mut cls_probs = Tensor3::zeros(3, h, w);
        for i in 0..n {
            let (z0, z1, z2) = (cls_z.data[i], cls_z.data[n + i], cls_z.data[2 * n + i]);
            let m = z0.max(z1).max(z2);
            let (e0, e1, e2) = ((z0 - m).exp(), (z1 - m).exp(), (z2 - m).exp());
            let total = e0 + e1 + e2;
            cls_probs.data[i] = e0 / total;
            cls_probs.data[n + i] = e1 / total;
            cls_probs.data[2 * n + i] = e2 / total;
        }

        // Embedding head: per-pixel L2 normalization.
        let emb_raw = self.emb_head.forward(&trunk);
        let e = emb_raw.c;
        let mut emb_norm = emb_raw.clone();
        let guard = s::<S>(1e-12);
        for i in 0..n {
            let mut sq = S::zero();
            for c in 0..e {
                let v = emb_raw.data[c * n + i];
                sq += v * v;
            }
            let inv = S::one() / (sq + guard).sqrt();
            for c in 0..e {
                emb_norm.data[c * n + i] = emb_raw.data[c * n + i] * inv;
            }
        }

        let outputs = SampleOutputs {
            p: p.clone(),
            cls: cls_probs.clone(),
            embed: emb_norm.clone(),
        };
        let cache = SampleCache {
            enc: enc_caches,
            dec: dec_caches,
            trunk,
            seg_z,
            p,
            cls_probs,
            emb_raw,
            emb_norm,
        };
        Ok((outputs, cache))
    }

    /// Inference-only path: trunk + segmentation head, auxiliary heads
    /// untouched.
    pub fn infer_p(&self, x: &Tensor3<S>) -> Result<Field<S>> {
        self.check_input(x)?;
        let (enc_caches, dec_caches) = self.forward_trunk(x);
        let trunk = if let Some(last) = dec_caches.last() {
            &last.out
        } else {
            &enc_caches.last().unwrap().out
        };
        let n = trunk.h * trunk.w;
        let seg_z = self.seg_head.forward(trunk);
        let mut p = Field::zeros(trunk.h, trunk.w);
        for i in 0..n {
            p.data[i] = sigmoid(seg_z.data[n + i] - seg_z.data[i]);
        }
        Ok(p)
    }

    /// Batch forward without caches (evaluation).
    pub fn forward_batch(&self, images: &[Tensor3<S>]) -> Result<ModelOutputs<S>> {
        let mut samples = Vec::with_capacity(images.len());
        for x in images {
            samples.push(self.forward_sample(x)?.0);
        }
        Ok(ModelOutputs { samples })
    }

    /// Backward for one sample. Upstream gradients may be absent for the
    /// auxiliary heads (e.g. during warmup).
    pub fn backward_sample(
        &self,
        cache: &SampleCache<S>,
        grad_p: &Field<S>,
        grad_cls: Option<&Tensor3<S>>,
        grad_emb: Option<&Tensor3<S>>,
        grads: &mut ModelGrads<S>,
    ) {
        let n_enc_layers = self.enc.len() * 2;
        let n_dec_layers = self.dec.len() * 2;
        let (h, w) = (cache.trunk.h, cache.trunk.w);
        let n = h * w;
        let mut gtrunk = Tensor3::zeros(cache.trunk.c, h, w);

        // Segmentation head: p = sigmoid(z1 - z0).
        {
            let mut gz = Tensor3::zeros(2, h, w);
            for i in 0..n {
                let p = cache.p.data[i];
                let g = grad_p.data[i] * p * (S::one() - p);
                gz.data[i] = -g;
                gz.data[n + i] = g;
            }
            let idx = n_enc_layers + n_dec_layers;
            let gt = self
                .seg_head
                .backward(&cache.trunk, &gz, &mut grads.layers[idx]);
            for (a, &b) in gtrunk.data.iter_mut().zip(&gt.data) {
                *a += b;
            }
        }

        // Classification head: softmax Jacobian.
        if let Some(gcls) = grad_cls {
            let mut gz = Tensor3::zeros(3, h, w);
            for i in 0..n {
                let q = [
                    cache.cls_probs.data[i],
                    cache.cls_probs.data[n + i],
                    cache.cls_probs.data[2 * n + i],
                ];
                let g = [gcls.data[i], gcls.data[n + i], gcls.data[2 * n + i]];
                let dot = q[0] * g[0] + q[1] * g[1] + q[2] * g[2];
                for k in 0..3 {
                    gz.data[k * n + i] = q[k] * (g[k] - dot);
                }
            }
            let idx = n_enc_layers + n_dec_layers + 1;
            let gt = self
                .cls_head
                .backward(&cache.trunk, &gz, &mut grads.layers[idx]);
            for (a, &b) in gtrunk.data.iter_mut().zip(&gt.data) {
                *a += b;
            }
        }

        // Embedding head: gradient through L2 normalization.
        if let Some(gemb) = grad_emb {
            let e = cache.emb_raw.c;
            let guard = s::<S>(1e-12);
            let mut graw = Tensor3::zeros(e, h, w);
            for i in 0..n {
                let mut sq = S::zero();
                let mut fg = S::zero();
                for c in 0..e {
                    let v = cache.emb_raw.data[c * n + i];
                    sq += v * v;
                    fg += cache.emb_norm.data[c * n + i] * gemb.data[c * n + i];
                }
                let inv = S::one() / (sq + guard).sqrt();
                for c in 0..e {
                    graw.data[c * n + i] =
                        (gemb.data[c * n + i] - cache.emb_norm.data[c * n + i] * fg) * inv;
                }
            }
            let idx = n_enc_layers + n_dec_layers + 2;
            let gt = self
                .emb_head
                .backward(&cache.trunk, &graw, &mut grads.layers[idx]);
            for (a, &b) in gtrunk.data.iter_mut().zip(&gt.data) {
                *a += b;
            }
        }

        // Decoder blocks in reverse, accumulating skip gradients.
        let mut gdeep = gtrunk;
        let mut gskip: Vec<Option<Tensor3<S>>> = vec![None; self.enc.len()];
        for (j, block) in self.dec.iter().enumerate().rev() {
            let skip_level = self.enc.len() - 2 - j;
            let (g1_idx, g2_idx) = (n_enc_layers + 2 * j, n_enc_layers + 2 * j + 1);
            // Split a borrow of two gradient slots.
            let (left, right) = grads.layers.split_at_mut(g2_idx);
            let gcat = block.backward(&cache.dec[j], &gdeep, &mut left[g1_idx], &mut right[0]);
            let up_c = cache.dec[j].x.c - self.enc[skip_level].c2.co;
            let (gup, gsk) = split(&gcat, up_c);
            gskip[skip_level] = Some(gsk);
            gdeep = upsample2_backward(&gup);
        }

        // Encoder blocks in reverse; the deepest takes gdeep directly.
        let mut gout = gdeep;
        for (i, block) in self.enc.iter().enumerate().rev() {
            if let Some(gsk) = &gskip[i] {
                for (a, &b) in gout.data.iter_mut().zip(&gsk.data) {
                    *a += b;
                }
            }
            let (g1_idx, g2_idx) = (2 * i, 2 * i + 1);
            let (left, right) = grads.layers.split_at_mut(g2_idx);
            let gin = block.backward(&cache.enc[i], &gout, &mut left[g1_idx], &mut right[0]);
            gout = if i == 0 {
                gin // gradient w.r.t. the image; unused
            } else {
                let prev = &cache.enc[i - 1].out;
                avg_pool2_backward(&gin, prev.h, prev.w)
            };
        }
    }
}
