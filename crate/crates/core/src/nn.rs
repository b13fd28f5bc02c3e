//! Neural layers and model assembly: the extractor stack (conv / pool /
//! linear), the classifier head and the full bag pipeline of
//! features -> optional self-attention -> attention pooling -> FC.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::attention::{AbMilpLayer, SelfAttentionLayer};
use crate::error::{MilError, Result};
use crate::kernels::KernelKind;
use crate::rng::SeededRng;
use crate::tensor::{conv2d, maxpool2d, ParamId, ParamSet, Tape, Tensor};

pub mod init {
    use alloc::vec::Vec;

    use crate::fmath;
    use crate::rng::SeededRng;

    /// Glorot-uniform draw: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    /// Biases are initialized to zero elsewhere, never drawn from here.
    pub fn glorot_uniform(
        rng: &mut SeededRng,
        fan_in: usize,
        fan_out: usize,
        len: usize,
    ) -> Vec<f64> {
        let a = fmath::sqrt(6.0 / (fan_in + fan_out) as f64);
        (0..len).map(|_| rng.uniform_range(-a, a)).collect()
    }
}

/// Declarative layer description; an ordered list forms an extractor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool2d {
        window: usize,
    },
    Linear {
        out_features: usize,
    },
    Relu,
    Tanh,
    Flatten,
}

/// The classic 6/16-filter LeNet5 feature stack; the final hidden FC layer
/// (84 units for 28x28x1 input) provides the instance embedding.
pub fn lenet5() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d {
            out_channels: 6,
            kernel: 5,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { window: 2 },
        LayerSpec::Conv2d {
            out_channels: 16,
            kernel: 5,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { window: 2 },
        LayerSpec::Flatten,
        LayerSpec::Linear { out_features: 120 },
        LayerSpec::Relu,
        LayerSpec::Linear { out_features: 84 },
        LayerSpec::Relu,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ShapeState {
    Image(usize, usize, usize),
    Flat(usize),
}

#[derive(Debug, Clone)]
enum BuiltLayer {
    Conv2d {
        w: ParamId,
        b: ParamId,
        stride: usize,
    },
    MaxPool2d {
        window: usize,
    },
    Linear {
        w: ParamId,
        b: ParamId,
    },
    Relu,
    Tanh,
    Flatten,
}

/// An instantiated layer stack mapping [N, C, H, W] instance stacks to
/// [N, L] embeddings.
#[derive(Debug, Clone)]
pub struct Extractor {
    layers: Vec<BuiltLayer>,
    pub input: (usize, usize, usize),
    pub out_dim: usize,
}

fn layer_err(index: usize, spec: &LayerSpec, msg: &str) -> MilError {
    MilError::Config(format!("extractor layer {index} ({spec:?}): {msg}"))
}

impl Extractor {
    /// Instantiate `specs` against `input` = (C, H, W), registering
    /// Glorot-initialized weights and zero biases.
    pub fn build(
        specs: &[LayerSpec],
        input: (usize, usize, usize),
        params: &mut ParamSet,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut state = ShapeState::Image(input.0, input.1, input.2);
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let built = match (*spec).clone() {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                } => {
                    let ShapeState::Image(c, h, w) = state else {
                        return Err(layer_err(i, spec, "conv2d applied to flat input"));
                    };
                    if kernel > h || kernel > w {
                        return Err(layer_err(i, spec, "kernel larger than input plane"));
                    }
                    if stride == 0 || out_channels == 0 {
                        return Err(layer_err(i, spec, "stride and channels must be >= 1"));
                    }
                    let fan_in = c * kernel * kernel;
                    let fan_out = out_channels * kernel * kernel;
                    let w_id = params.add(
                        &format!("extractor.{i}.conv.w"),
                        &[out_channels, c, kernel, kernel],
                        init::glorot_uniform(rng, fan_in, fan_out, out_channels * fan_in),
                    )?;
                    let b_id = params.add(
                        &format!("extractor.{i}.conv.b"),
                        &[out_channels],
                        vec![0.0; out_channels],
                    )?;
                    state = ShapeState::Image(
                        out_channels,
                        (h - kernel) / stride + 1,
                        (w - kernel) / stride + 1,
                    );
                    BuiltLayer::Conv2d {
                        w: w_id,
                        b: b_id,
                        stride,
                    }
                }
                LayerSpec::MaxPool2d { window } => {
                    let ShapeState::Image(c, h, w) = state else {
                        return Err(layer_err(i, spec, "maxpool2d applied to flat input"));
                    };
                    if window == 0 || window > h || window > w {
                        return Err(layer_err(i, spec, "window does not fit the input plane"));
                    }
                    state = ShapeState::Image(c, h / window, w / window);
                    BuiltLayer::MaxPool2d { window }
                }
                LayerSpec::Linear { out_features } => {
                    let ShapeState::Flat(d) = state else {
                        return Err(layer_err(i, spec, "linear applied before flatten"));
                    };
                    if out_features == 0 {
                        return Err(layer_err(i, spec, "out_features must be >= 1"));
                    }
                    let w_id = params.add(
                        &format!("extractor.{i}.linear.w"),
                        &[out_features, d],
                        init::glorot_uniform(rng, d, out_features, out_features * d),
                    )?;
                    let b_id = params.add(
                        &format!("extractor.{i}.linear.b"),
                        &[out_features],
                        vec![0.0; out_features],
                    )?;
                    state = ShapeState::Flat(out_features);
                    BuiltLayer::Linear { w: w_id, b: b_id }
                }
                LayerSpec::Relu => BuiltLayer::Relu,
                LayerSpec::Tanh => BuiltLayer::Tanh,
                LayerSpec::Flatten => {
                    let ShapeState::Image(c, h, w) = state else {
                        return Err(layer_err(i, spec, "flatten applied twice"));
                    };
                    state = ShapeState::Flat(c * h * w);
                    BuiltLayer::Flatten
                }
            };
            layers.push(built);
        }
        let out_dim = match state {
            ShapeState::Flat(d) => d,
            ShapeState::Image(..) => {
                return Err(MilError::Config(
                    "extractor must end in a flat embedding (add flatten/linear)".into(),
                ))
            }
        };
        Ok(Self {
            layers,
            input,
            out_dim,
        })
    }

    pub fn forward(&self, tape: &Tape, params: &ParamSet, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                BuiltLayer::Conv2d { w, b, stride } => conv2d(
                    &cur,
                    &tape.leaf(params, *w),
                    &tape.leaf(params, *b),
                    *stride,
                )?,
                BuiltLayer::MaxPool2d { window } => maxpool2d(&cur, *window)?,
                BuiltLayer::Linear { w, b } => cur
                    .matmul(&tape.leaf(params, *w).transpose()?)?
                    .add_row_broadcast(&tape.leaf(params, *b))?,
                BuiltLayer::Relu => cur.relu()?,
                BuiltLayer::Tanh => cur.tanh()?,
                BuiltLayer::Flatten => {
                    let n = cur.shape()[0];
                    let rest = cur.len() / n;
                    cur.reshape(&[n, rest])?
                }
            };
        }
        Ok(cur)
    }
}

/// Full model description; `self_attention: None` gives the pooling-only
/// baseline.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    /// Instance shape (C, H, W).
    pub input: (usize, usize, usize),
    /// Attention pooling bottleneck width M.
    pub attention_hidden: usize,
    pub self_attention: Option<KernelKind>,
    pub alpha_init: f64,
    pub seed: u64,
}

pub struct MilModel {
    pub spec: ModelSpec,
    pub params: ParamSet,
    pub extractor: Extractor,
    pub pooling: AbMilpLayer,
    pub attention: Option<SelfAttentionLayer>,
    head_w: ParamId,
    head_b: ParamId,
}

/// One bag forward pass, with the tape kept alive for backward.
pub struct BagForward {
    pub tape: Tape,
    /// Bag probability, shape [1]; strictly inside (0, 1).
    pub p: Tensor,
    /// Pooling weights over instances, shape [1, N], summing to 1.
    pub weights: Tensor,
    /// Self-attention map [N, N], present iff the layer is enabled.
    pub beta: Option<Tensor>,
}

impl MilModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let mut params = ParamSet::new();
        let mut rng = SeededRng::with_stream(spec.seed, 0x1417);
        let extractor = Extractor::build(&spec.layers, spec.input, &mut params, &mut rng)?;
        let embed = extractor.out_dim;
        let pooling = AbMilpLayer::new(&mut params, &mut rng, spec.attention_hidden, embed)?;
        let head_w = params.add(
            "head.w",
            &[1, embed],
            init::glorot_uniform(&mut rng, embed, 1, embed),
        )?;
        let head_b = params.add("head.b", &[1], vec![0.0])?;
        // Self-attention parameters are registered last so that a model with
        // the layer disabled shares bit-identical extractor / pooling / head
        // initialization with one that has it enabled (same seed).
        let attention = match spec.self_attention {
            Some(kernel) => Some(SelfAttentionLayer::new(
                &mut params,
                &mut rng,
                embed,
                kernel,
                spec.alpha_init,
            )?),
            None => None,
        };
        Ok(Self {
            spec,
            params,
            extractor,
            pooling,
            attention,
            head_w,
            head_b,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.extractor.out_dim
    }

    /// Run one bag of `n` instances (row-major [n, C, H, W] pixels).
    pub fn forward_bag(&self, instances: &[f64], n: usize) -> Result<BagForward> {
        self.forward_bag_with(&self.params, instances, n)
    }

    /// Same forward pass, reading weights from an external parameter set of
    /// identical layout (used by finite-difference gradient checks).
    pub fn forward_bag_with(
        &self,
        params: &ParamSet,
        instances: &[f64],
        n: usize,
    ) -> Result<BagForward> {
        if n == 0 {
            return Err(MilError::InvalidTensor("empty bag".into()));
        }
        let (c, h, w) = self.spec.input;
        let tape = Tape::new();
        let x = tape.constant(&[n, c, h, w], instances.to_vec())?;
        let embeddings = self.extractor.forward(&tape, params, &x)?;
        let (embeddings, beta) = match &self.attention {
            Some(sa) => {
                let (mixed, beta) = sa.forward(&tape, params, &embeddings)?;
                (mixed, Some(beta))
            }
            None => (embeddings, None),
        };
        let (pooled, weights) = self.pooling.forward(&tape, params, &embeddings)?;
        let p = pooled
            .matmul(&tape.leaf(params, self.head_w).transpose()?)?
            .add_row_broadcast(&tape.leaf(params, self.head_b))?
            .sigmoid()?
            .reshape(&[1])?;
        Ok(BagForward {
            tape,
            p,
            weights,
            beta,
        })
    }

    /// Parameter names in registration order (checkpoint layout).
    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }
}

/// Binary cross-entropy on a probability tensor of shape [1]. The
/// probability is clamped to [1e-7, 1 - 1e-7] before the logs.
pub fn bce_loss(p: &Tensor, label: bool) -> Result<Tensor> {
    let y = if label { 1.0 } else { 0.0 };
    let pc = p.clamp(1e-7, 1.0 - 1e-7)?;
    let ln_p = pc.ln()?;
    let ln_1mp = pc.neg()?.add_scalar(1.0)?.ln()?;
    ln_p.scale(-y)?.add(&ln_1mp.scale(-(1.0 - y))?)
}
