//! The two pooling operators: attention-based MIL pooling (a learned
//! weighted average over instances) and the kernel self-attention layer
//! that mixes instance embeddings before pooling.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{MilError, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::nn::init::glorot_uniform;
use crate::rng::SeededRng;
use crate::tensor::{ParamId, ParamSet, Tape, Tensor};

/// Weighted-average pooling: a_i = softmax_i(w^T tanh(V h_i)), z = sum a_i h_i.
#[derive(Debug, Clone)]
pub struct AbMilpLayer {
    pub v: ParamId,
    pub w: ParamId,
    pub hidden: usize,
    pub embed: usize,
}

impl AbMilpLayer {
    /// `hidden` is the attention bottleneck width M, `embed` the instance
    /// embedding width L.
    pub fn new(
        params: &mut ParamSet,
        rng: &mut SeededRng,
        hidden: usize,
        embed: usize,
    ) -> Result<Self> {
        let v = params.add(
            "pool.v",
            &[hidden, embed],
            glorot_uniform(rng, embed, hidden, hidden * embed),
        )?;
        let w = params.add(
            "pool.w",
            &[hidden, 1],
            glorot_uniform(rng, hidden, 1, hidden),
        )?;
        Ok(Self {
            v,
            w,
            hidden,
            embed,
        })
    }

    /// Pool an [N, L] embedding stack into ([1, L] bag vector, [1, N]
    /// instance weights summing to 1).
    pub fn forward(
        &self,
        tape: &Tape,
        params: &ParamSet,
        embeddings: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        check_embeddings(embeddings, self.embed)?;
        let v = tape.leaf(params, self.v);
        let w = tape.leaf(params, self.w);
        let logits = w
            .transpose()?
            .matmul(&v.matmul(&embeddings.transpose()?)?.tanh()?)?;
        let weights = logits.softmax_rows()?;
        let pooled = weights.matmul(embeddings)?;
        Ok((pooled, weights))
    }
}

/// Self-attention with a kernelized score and a gamma-gated residual:
/// h_j' = gamma * sum_i beta[j,i] W_v h_i + h_j. Gamma starts at 0 so the
/// layer is the identity at initialization.
#[derive(Debug, Clone)]
pub struct SelfAttentionLayer {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub gamma: ParamId,
    pub kernel: KernelSpec,
    pub embed: usize,
    pub proj: usize,
}

impl SelfAttentionLayer {
    pub fn new(
        params: &mut ParamSet,
        rng: &mut SeededRng,
        embed: usize,
        kernel: KernelKind,
        alpha_init: f64,
    ) -> Result<Self> {
        // Key/query projections live in a reduced space of width
        // max(1, L / 8).
        let proj = (embed / 8).max(1);
        let w_q = params.add(
            "sa.w_q",
            &[proj, embed],
            glorot_uniform(rng, embed, proj, proj * embed),
        )?;
        let w_k = params.add(
            "sa.w_k",
            &[proj, embed],
            glorot_uniform(rng, embed, proj, proj * embed),
        )?;
        let w_v = params.add(
            "sa.w_v",
            &[embed, embed],
            glorot_uniform(rng, embed, embed, embed * embed),
        )?;
        let gamma = params.add("sa.gamma", &[1], alloc::vec![0.0])?;
        let kernel = KernelSpec::register(kernel, alpha_init, params, "sa.alpha")?;
        Ok(Self {
            w_q,
            w_k,
            w_v,
            gamma,
            kernel,
            embed,
            proj,
        })
    }

    /// Returns (mixed embeddings [N, L], attention map beta [N, N]).
    /// beta[j, i] is the weight on instance i when synthesizing instance j;
    /// each row of beta sums to 1.
    pub fn forward(
        &self,
        tape: &Tape,
        params: &ParamSet,
        embeddings: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        check_embeddings(embeddings, self.embed)?;
        let keys = embeddings.matmul(&tape.leaf(params, self.w_k).transpose()?)?;
        let queries = embeddings.matmul(&tape.leaf(params, self.w_q).transpose()?)?;
        let scores = self.kernel.score_matrix(tape, params, &keys, &queries)?;
        // Normalization runs over the attended index i for fixed j, so the
        // softmax acts on columns of S; transposing makes those the rows.
        let beta = scores.transpose()?.softmax_rows()?;
        let values = embeddings.matmul(&tape.leaf(params, self.w_v).transpose()?)?;
        let mixed = beta
            .matmul(&values)?
            .mul_scalar_tensor(&tape.leaf(params, self.gamma))?
            .add(embeddings)?;
        Ok((mixed, beta))
    }
}

fn check_embeddings(embeddings: &Tensor, embed: usize) -> Result<()> {
    match embeddings.shape() {
        [n, l] if *l == embed && *n >= 1 => Ok(()),
        shape => Err(MilError::InvalidTensor(format!(
            "expected [N, {embed}] embeddings, got {shape:?}"
        ))),
    }
}

/// All parameter names of a layer stack, used by checkpoint IO.
pub fn param_names(params: &ParamSet) -> Vec<&str> {
    params.iter().map(|p| p.name.as_str()).collect()
}
