//! Similarity kernels for the self-attention score matrix.
//!
//! The plain dot product can be swapped for RBF, inverse quadratic, Laplace
//! or module similarities. Where a kernel has a shape parameter alpha it is
//! trainable; positivity is enforced by storing an unconstrained raw value
//! and applying softplus.

use alloc::format;
use alloc::vec;

use crate::error::{MilError, Result};
use crate::fmath;
use crate::tensor::{Norm, ParamId, ParamSet, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Dot,
    Rbf,
    InverseQuadratic,
    Laplace,
    Module,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Dot => "dot",
            KernelKind::Rbf => "rbf",
            KernelKind::InverseQuadratic => "inverse_quadratic",
            KernelKind::Laplace => "laplace",
            KernelKind::Module => "module",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "dot" => Ok(KernelKind::Dot),
            "rbf" => Ok(KernelKind::Rbf),
            "inverse_quadratic" => Ok(KernelKind::InverseQuadratic),
            "laplace" => Ok(KernelKind::Laplace),
            "module" => Ok(KernelKind::Module),
            other => Err(MilError::Config(format!("unknown kernel: {other}"))),
        }
    }

    /// Dot and Laplace have no shape parameter.
    pub fn has_alpha(&self) -> bool {
        matches!(
            self,
            KernelKind::Rbf | KernelKind::InverseQuadratic | KernelKind::Module
        )
    }

    pub const ALL: [KernelKind; 5] = [
        KernelKind::Dot,
        KernelKind::Rbf,
        KernelKind::InverseQuadratic,
        KernelKind::Laplace,
        KernelKind::Module,
    ];
}

/// A kernel choice plus its (optional) trainable shape parameter.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Unconstrained parameter; the effective alpha is softplus(raw).
    pub alpha_raw: Option<ParamId>,
}

impl KernelSpec {
    /// Register the kernel, creating the raw alpha parameter when the kernel
    /// has one. `alpha_init` is the initial *effective* alpha (must be > 0).
    pub fn register(
        kind: KernelKind,
        alpha_init: f64,
        params: &mut ParamSet,
        name: &str,
    ) -> Result<Self> {
        let alpha_raw = if kind.has_alpha() {
            if alpha_init <= 0.0 {
                return Err(MilError::Config(format!(
                    "kernel alpha must be positive, got {alpha_init}"
                )));
            }
            let raw = fmath::softplus_inverse(alpha_init);
            Some(params.add(name, &[1], vec![raw])?)
        } else {
            None
        };
        Ok(Self { kind, alpha_raw })
    }

    /// Effective alpha as a differentiable tensor.
    fn alpha(&self, tape: &Tape, params: &ParamSet) -> Result<Option<Tensor>> {
        match self.alpha_raw {
            Some(id) => {
                let a = tape.leaf(params, id).softplus()?;
                debug_assert!(a.data()[0] > 0.0, "softplus keeps alpha positive");
                Ok(Some(a))
            }
            None => Ok(None),
        }
    }

    /// Score matrix S with S[i, j] = kernel(K_i, Q_j) for key rows K and
    /// query rows Q.
    pub fn score_matrix(
        &self,
        tape: &Tape,
        params: &ParamSet,
        keys: &Tensor,
        queries: &Tensor,
    ) -> Result<Tensor> {
        if keys.shape() != queries.shape() {
            return Err(MilError::ShapeMismatch {
                op: "score_matrix",
                lhs: keys.shape().to_vec(),
                rhs: queries.shape().to_vec(),
            });
        }
        let alpha = self.alpha(tape, params)?;
        match self.kind {
            KernelKind::Dot => keys.matmul(&queries.transpose()?),
            KernelKind::Rbf => {
                let d = keys.pairwise_distances(queries, Norm::L2Sq)?;
                let alpha = alpha.expect("rbf carries alpha");
                d.mul_scalar_tensor(&alpha)?.scale(-1.0)?.exp()
            }
            KernelKind::InverseQuadratic => {
                let d = keys.pairwise_distances(queries, Norm::L2Sq)?;
                let alpha = alpha.expect("inverse_quadratic carries alpha");
                d.mul_scalar_tensor(&alpha)?.add_scalar(1.0)?.powf(-1.0)
            }
            KernelKind::Laplace => {
                let d = keys.pairwise_distances(queries, Norm::L1)?;
                d.scale(-1.0)
            }
            KernelKind::Module => {
                // ||K_i - Q_j||^a - ||K_i||^a - ||Q_j||^a with Euclidean norms.
                let alpha = alpha.expect("module carries alpha");
                let dist = keys
                    .pairwise_distances(queries, Norm::L2Sq)?
                    .powf(0.5)?
                    .pow_scalar_exp(&alpha)?;
                let knorm = keys
                    .mul(keys)?
                    .sum_rows()?
                    .powf(0.5)?
                    .pow_scalar_exp(&alpha)?;
                let qnorm = queries
                    .mul(queries)?
                    .sum_rows()?
                    .powf(0.5)?
                    .pow_scalar_exp(&alpha)?;
                dist.add_col_broadcast(&knorm.neg()?)?
                    .add_row_broadcast(&qnorm.neg()?)
            }
        }
    }
}
