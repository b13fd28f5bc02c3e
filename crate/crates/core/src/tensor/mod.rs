//! Dense `f64` tensors on a define-by-run computation tape.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! walks the record once in reverse append order and accumulates gradients.
//! Graphs are rebuilt per forward pass, so variable bag sizes need no special
//! handling. All values are checked finite on creation: a NaN or infinity is
//! reported as an error instead of flowing into downstream metrics.

mod conv;
mod linalg;

pub use conv::{conv2d, maxpool2d};
pub(crate) use linalg::{mm, mm_nt, mm_tn};

use alloc::boxed::Box;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{MilError, Result};
use crate::fmath;

/// Gradient of a node -> contributions to each parent, as (parent id, grad).
type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<(usize, Vec<f64>)>>;

struct Node {
    backward: Option<BackwardFn>,
    /// Slot in the owning `ParamSet` when this node is a parameter leaf.
    param: Option<usize>,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    /// Per-node gradients, populated by the last `backward` call.
    grads: Vec<Option<Vec<f64>>>,
}

/// Append-only operation record shared by all tensors of one forward pass.
#[derive(Clone, Default)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

/// A value on the tape: shape, row-major data and the node it came from.
#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Rc<Vec<f64>>,
    node: usize,
    tape: Tape,
}

impl core::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}


fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn ensure_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MilError::NonFinite { op })
    }
}

fn add_into(acc: &mut [f64], contrib: &[f64]) {
    for (a, c) in acc.iter_mut().zip(contrib) {
        *a += c;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(
        &self,
        shape: Vec<usize>,
        data: Vec<f64>,
        backward: Option<BackwardFn>,
        param: Option<usize>,
    ) -> Tensor {
        debug_assert_eq!(data.len(), numel(&shape));
        let node = {
            let mut inner = self.inner.borrow_mut();
            inner.nodes.push(Node { backward, param });
            inner.nodes.len() - 1
        };
        Tensor {
            shape,
            data: Rc::new(data),
            node,
            tape: self.clone(),
        }
    }

    /// A tensor with no history; gradients still flow *to* it so inputs can
    /// be gradient-checked.
    pub fn constant(&self, shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if numel(shape) != data.len() {
            return Err(MilError::InvalidTensor(
                "data length does not match shape product".to_string(),
            ));
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(MilError::InvalidTensor("zero-sized dimension".to_string()));
        }
        ensure_finite("constant", &data)?;
        Ok(self.push(shape.to_vec(), data, None, None))
    }

    pub fn scalar(&self, v: f64) -> Result<Tensor> {
        self.constant(&[1], vec![v])
    }

    /// Leaf tensor bound to a parameter; `accumulate_grads` adds the
    /// gradient computed here into the parameter's grad buffer.
    pub fn leaf(&self, params: &ParamSet, id: ParamId) -> Tensor {
        let p = params.get(id);
        self.push(p.shape.clone(), p.value.clone(), None, Some(id.0))
    }

    /// Reverse pass from a scalar loss. Populates the gradient of every node
    /// reached from `loss`; query with [`Tensor::grad`] or fold parameter
    /// gradients in with [`Tape::accumulate_grads`].
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.data.len() != 1 {
            return Err(MilError::InvalidTensor(alloc::format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape
            )));
        }
        if !Rc::ptr_eq(&self.inner, &loss.tape.inner) {
            return Err(MilError::InvalidTensor(
                "loss tensor does not belong to this tape".to_string(),
            ));
        }
        let mut inner = self.inner.borrow_mut();
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.node] = Some(vec![1.0]);
        for k in (0..n).rev() {
            let g = match grads[k].take() {
                Some(g) => g,
                None => continue,
            };
            if let Some(bw) = &inner.nodes[k].backward {
                for (parent, contrib) in bw(&g) {
                    debug_assert!(parent < k, "graph must be acyclic by construction");
                    match &mut grads[parent] {
                        Some(acc) => add_into(acc, &contrib),
                        slot @ None => *slot = Some(contrib),
                    }
                }
            }
            grads[k] = Some(g);
        }
        inner.grads = grads;
        Ok(())
    }

    /// Add the gradients of parameter leaves into their `grad` buffers.
    /// Calling backward + accumulate repeatedly without `zero_grad` sums.
    pub fn accumulate_grads(&self, params: &mut ParamSet) {
        let inner = self.inner.borrow();
        for (node, rec) in inner.nodes.iter().enumerate() {
            if let Some(slot) = rec.param {
                if let Some(Some(g)) = inner.grads.get(node) {
                    add_into(&mut params.params[slot].grad, g);
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.inner.borrow().nodes.len()
    }
}

/// Supported norms for [`Tensor::pairwise_distances`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2Sq,
}

impl Tensor {
    /// The tape this tensor was recorded on.
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(MilError::InvalidTensor(alloc::format!(
                "item() on non-scalar tensor of shape {:?}",
                self.shape
            )))
        }
    }

    /// Gradient computed by the last `backward` on this tape, if this node
    /// was reached.
    pub fn grad(&self) -> Option<Vec<f64>> {
        let inner = self.tape.inner.borrow();
        inner.grads.get(self.node).and_then(|g| g.clone())
    }

    fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(MilError::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            })
        }
    }

    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        // df(x, y) where y = f(x)
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Tensor> {
        let out: Vec<f64> = self.data.iter().map(|&x| f(x)).collect();
        ensure_finite(op, &out)?;
        let x = Rc::clone(&self.data);
        let y = Rc::new(out.clone());
        let parent = self.node;
        let backward: BackwardFn = Box::new(move |g| {
            let gx = g
                .iter()
                .zip(x.iter().zip(y.iter()))
                .map(|(&gi, (&xi, &yi))| gi * df(xi, yi))
                .collect();
            vec![(parent, gx)]
        });
        Ok(self
            .tape
            .push(self.shape.clone(), out, Some(backward), None))
    }

    fn binary(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
        // (da, db) as functions of (a, b)
        dfa: impl Fn(f64, f64) -> f64 + 'static,
        dfb: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Tensor> {
        self.same_shape(other, op)?;
        let out: Vec<f64> = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        ensure_finite(op, &out)?;
        let a = Rc::clone(&self.data);
        let b = Rc::clone(&other.data);
        let (pa, pb) = (self.node, other.node);
        let backward: BackwardFn = Box::new(move |g| {
            let ga = g
                .iter()
                .zip(a.iter().zip(b.iter()))
                .map(|(&gi, (&ai, &bi))| gi * dfa(ai, bi))
                .collect();
            let gb = g
                .iter()
                .zip(a.iter().zip(b.iter()))
                .map(|(&gi, (&ai, &bi))| gi * dfb(ai, bi))
                .collect();
            vec![(pa, ga), (pb, gb)]
        });
        Ok(self
            .tape
            .push(self.shape.clone(), out, Some(backward), None))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn neg(&self) -> Result<Tensor> {
        self.unary("neg", |x| -x, |_, _| -1.0)
    }

    pub fn scale(&self, c: f64) -> Result<Tensor> {
        self.unary("scale", move |x| c * x, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Tensor> {
        self.unary("add_scalar", move |x| x + c, |_, _| 1.0)
    }

    pub fn exp(&self) -> Result<Tensor> {
        self.unary("exp", fmath::exp, |_, y| y)
    }

    pub fn ln(&self) -> Result<Tensor> {
        self.unary("ln", fmath::ln, |x, _| 1.0 / x)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        self.unary("tanh", fmath::tanh, |_, y| 1.0 - y * y)
    }

    pub fn abs(&self) -> Result<Tensor> {
        self.unary("abs", fmath::abs, |x, _| fmath::sign(x))
    }

    pub fn relu(&self) -> Result<Tensor> {
        self.unary(
            "relu",
            |x| if x > 0.0 { x } else { 0.0 },
            |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        )
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        self.unary("sigmoid", fmath::sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn softplus(&self) -> Result<Tensor> {
        self.unary("softplus", fmath::softplus, |x, _| fmath::sigmoid(x))
    }

    /// Elementwise power with a fixed exponent. Subgradient 0 at x = 0 for
    /// exponents below 1 where the true derivative diverges.
    pub fn powf(&self, p: f64) -> Result<Tensor> {
        self.unary(
            "pow_scalar",
            move |x| fmath::powf(x, p),
            move |x, _| {
                if x == 0.0 {
                    0.0
                } else {
                    p * fmath::powf(x, p - 1.0)
                }
            },
        )
    }

    /// Clamp to [lo, hi]; gradient is 1 inside the interval and 0 outside.
    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Tensor> {
        self.unary(
            "clamp",
            move |x| x.clamp(lo, hi),
            move |x, _| if x >= lo && x <= hi { 1.0 } else { 0.0 },
        )
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum(&self) -> Result<Tensor> {
        let total: f64 = self.data.iter().sum();
        ensure_finite("sum", &[total])?;
        let parent = self.node;
        let n = self.data.len();
        let backward: BackwardFn = Box::new(move |g| vec![(parent, vec![g[0]; n])]);
        Ok(self.tape.push(vec![1], vec![total], Some(backward), None))
    }

    /// Row sums of a 2-D tensor: [r, c] -> [r, 1].
    pub fn sum_rows(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("sum_rows")?;
        let out: Vec<f64> = (0..r).map(|i| self.data[i * c..(i + 1) * c].iter().sum()).collect();
        ensure_finite("sum_rows", &out)?;
        let parent = self.node;
        let backward: BackwardFn = Box::new(move |g| {
            let mut gx = vec![0.0; r * c];
            for i in 0..r {
                gx[i * c..(i + 1) * c].fill(g[i]);
            }
            vec![(parent, gx)]
        });
        Ok(self.tape.push(vec![r, 1], out, Some(backward), None))
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.data.len() {
            return Err(MilError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        let parent = self.node;
        let backward: BackwardFn = Box::new(move |g| vec![(parent, g.to_vec())]);
        Ok(self
            .tape
            .push(shape.to_vec(), self.data.to_vec(), Some(backward), None))
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(MilError::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: vec![],
            }),
        }
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("transpose")?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        let parent = self.node;
        let backward: BackwardFn = Box::new(move |g| {
            // g has shape [c, r]; transpose it back.
            let mut gx = vec![0.0; r * c];
            for j in 0..c {
                for i in 0..r {
                    gx[i * c + j] = g[j * r + i];
                }
            }
            vec![(parent, gx)]
        });
        Ok(self.tape.push(vec![c, r], out, Some(backward), None))
    }

    /// Standard matrix product [m, k] x [k, n] -> [m, n].
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = other.dims2("matmul")?;
        if k != k2 {
            return Err(MilError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        mm(m, k, n, &self.data, &other.data, &mut out);
        ensure_finite("matmul", &out)?;
        let a = Rc::clone(&self.data);
        let b = Rc::clone(&other.data);
        let (pa, pb) = (self.node, other.node);
        let backward: BackwardFn = Box::new(move |g| {
            // dL/da = g . b^T, dL/db = a^T . g
            let mut ga = vec![0.0; m * k];
            mm_nt(m, n, k, g, &b, &mut ga);
            let mut gb = vec![0.0; k * n];
            mm_tn(m, k, n, &a, g, &mut gb);
            vec![(pa, ga), (pb, gb)]
        });
        Ok(self.tape.push(vec![m, n], out, Some(backward), None))
    }

    /// Row-stable softmax of a 2-D tensor: each output row is non-negative
    /// and sums to 1. Computed with per-row max subtraction.
    pub fn softmax_rows(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("softmax_rows")?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &self.data[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let orow = &mut out[i * c..(i + 1) * c];
            let mut denom = 0.0;
            for (o, &x) in orow.iter_mut().zip(row) {
                *o = fmath::exp(x - max);
                denom += *o;
            }
            for o in orow.iter_mut() {
                *o /= denom;
            }
        }
        ensure_finite("softmax_rows", &out)?;
        let y = Rc::new(out.clone());
        let parent = self.node;
        let backward: BackwardFn = Box::new(move |g| {
            // dL/ds_ij = y_ij * (g_ij - sum_j g_ij y_ij)
            let mut gx = vec![0.0; r * c];
            for i in 0..r {
                let yr = &y[i * c..(i + 1) * c];
                let gr = &g[i * c..(i + 1) * c];
                let dot: f64 = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                for ((gx, &yv), &gv) in gx[i * c..(i + 1) * c].iter_mut().zip(yr).zip(gr) {
                    *gx = yv * (gv - dot);
                }
            }
            vec![(parent, gx)]
        });
        Ok(self.tape.push(vec![r, c], out, Some(backward), None))
    }

    /// Entry (i, j) is the L1 distance or squared L2 distance between row i
    /// of `self` and row j of `other`. L1 uses sign with subgradient 0 at
    /// ties.
    pub fn pairwise_distances(&self, other: &Tensor, norm: Norm) -> Result<Tensor> {
        let (n, d) = self.dims2("pairwise_distances")?;
        let (m, d2) = other.dims2("pairwise_distances")?;
        if d != d2 {
            return Err(MilError::ShapeMismatch {
                op: "pairwise_distances",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let ai = &self.data[i * d..(i + 1) * d];
            for j in 0..m {
                let bj = &other.data[j * d..(j + 1) * d];
                out[i * m + j] = match norm {
                    Norm::L2Sq => ai
                        .iter()
                        .zip(bj)
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum(),
                    Norm::L1 => ai.iter().zip(bj).map(|(&a, &b)| fmath::abs(a - b)).sum(),
                };
            }
        }
        ensure_finite("pairwise_distances", &out)?;
        let a = Rc::clone(&self.data);
        let b = Rc::clone(&other.data);
        let (pa, pb) = (self.node, other.node);
        let backward: BackwardFn = Box::new(move |g| {
            let mut ga = vec![0.0; n * d];
            let mut gb = vec![0.0; m * d];
            for i in 0..n {
                for j in 0..m {
                    let gij = g[i * m + j];
                    if gij == 0.0 {
                        continue;
                    }
                    for t in 0..d {
                        let diff = a[i * d + t] - b[j * d + t];
                        let dd = match norm {
                            Norm::L2Sq => 2.0 * diff,
                            Norm::L1 => fmath::sign(diff),
                        };
                        ga[i * d + t] += gij * dd;
                        gb[j * d + t] -= gij * dd;
                    }
                }
            }
            vec![(pa, ga), (pb, gb)]
        });
        Ok(self.tape.push(vec![n, m], out, Some(backward), None))
    }

    /// Add a row vector (shape [1, c] or [c]) to every row of a 2-D tensor.
    pub fn add_row_broadcast(&self, row: &Tensor) -> Result<Tensor> {
        let (r, c) = self.dims2("add_row_broadcast")?;
        if row.data.len() != c {
            return Err(MilError::ShapeMismatch {
                op: "add_row_broadcast",
                lhs: self.shape.clone(),
                rhs: row.shape.clone(),
            });
        }
        let mut out = self.data.to_vec();
        for i in 0..r {
            add_into(&mut out[i * c..(i + 1) * c], &row.data);
        }
        ensure_finite("add_row_broadcast", &out)?;
        let (pa, pb) = (self.node, row.node);
        let backward: BackwardFn = Box::new(move |g| {
            let mut grow = vec![0.0; c];
            for i in 0..r {
                add_into(&mut grow, &g[i * c..(i + 1) * c]);
            }
            vec![(pa, g.to_vec()), (pb, grow)]
        });
        Ok(self.tape.push(vec![r, c], out, Some(backward), None))
    }

    /// Add a column vector (shape [r, 1] or [r]) to every column.
    pub fn add_col_broadcast(&self, col: &Tensor) -> Result<Tensor> {
        let (r, c) = self.dims2("add_col_broadcast")?;
        if col.data.len() != r {
            return Err(MilError::ShapeMismatch {
                op: "add_col_broadcast",
                lhs: self.shape.clone(),
                rhs: col.shape.clone(),
            });
        }
        let mut out = self.data.to_vec();
        for i in 0..r {
            let cv = col.data[i];
            for o in &mut out[i * c..(i + 1) * c] {
                *o += cv;
            }
        }
        ensure_finite("add_col_broadcast", &out)?;
        let (pa, pb) = (self.node, col.node);
        let backward: BackwardFn = Box::new(move |g| {
            let gcol: Vec<f64> = (0..r).map(|i| g[i * c..(i + 1) * c].iter().sum()).collect();
            vec![(pa, g.to_vec()), (pb, gcol)]
        });
        Ok(self.tape.push(vec![r, c], out, Some(backward), None))
    }

    /// Multiply every element by a scalar *tensor* (gradient flows to both).
    pub fn mul_scalar_tensor(&self, s: &Tensor) -> Result<Tensor> {
        if s.data.len() != 1 {
            return Err(MilError::ShapeMismatch {
                op: "mul_scalar_tensor",
                lhs: self.shape.clone(),
                rhs: s.shape.clone(),
            });
        }
        let sv = s.data[0];
        let out: Vec<f64> = self.data.iter().map(|&x| x * sv).collect();
        ensure_finite("mul_scalar_tensor", &out)?;
        let x = Rc::clone(&self.data);
        let (pa, pb) = (self.node, s.node);
        let backward: BackwardFn = Box::new(move |g| {
            let gx = g.iter().map(|&gi| gi * sv).collect();
            let gs: f64 = g.iter().zip(x.iter()).map(|(&gi, &xi)| gi * xi).sum();
            vec![(pa, gx), (pb, vec![gs])]
        });
        Ok(self
            .tape
            .push(self.shape.clone(), out, Some(backward), None))
    }

    /// Elementwise `self^alpha` with a scalar tensor exponent. Requires
    /// non-negative base values; at base 0 both partials use the
    /// subgradient convention and are set to 0.
    pub fn pow_scalar_exp(&self, alpha: &Tensor) -> Result<Tensor> {
        if alpha.data.len() != 1 {
            return Err(MilError::ShapeMismatch {
                op: "pow_scalar_exp",
                lhs: self.shape.clone(),
                rhs: alpha.shape.clone(),
            });
        }
        if self.data.iter().any(|&x| x < 0.0) {
            return Err(MilError::InvalidTensor(
                "pow_scalar_exp requires a non-negative base".to_string(),
            ));
        }
        let av = alpha.data[0];
        let out: Vec<f64> = self.data.iter().map(|&x| fmath::powf(x, av)).collect();
        ensure_finite("pow_scalar_exp", &out)?;
        let x = Rc::clone(&self.data);
        let y = Rc::new(out.clone());
        let (pa, pb) = (self.node, alpha.node);
        let backward: BackwardFn = Box::new(move |g| {
            let mut galpha = 0.0;
            let gx = g
                .iter()
                .zip(x.iter().zip(y.iter()))
                .map(|(&gi, (&xi, &yi))| {
                    if xi == 0.0 {
                        0.0
                    } else {
                        galpha += gi * yi * fmath::ln(xi);
                        gi * av * fmath::powf(xi, av - 1.0)
                    }
                })
                .collect();
            vec![(pa, gx), (pb, vec![galpha])]
        });
        Ok(self
            .tape
            .push(self.shape.clone(), out, Some(backward), None))
    }
}

/// A named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

/// Handle into a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// All trainable parameters of one model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: &[usize], value: Vec<f64>) -> Result<ParamId> {
        if numel(shape) != value.len() {
            return Err(MilError::InvalidTensor(
                "parameter value length does not match shape".to_string(),
            ));
        }
        if self.params.iter().any(|p| p.name == name) {
            return Err(MilError::Config(alloc::format!(
                "duplicate parameter name: {name}"
            )));
        }
        let grad = vec![0.0; value.len()];
        self.params.push(Parameter {
            name: name.into(),
            shape: shape.to_vec(),
            value,
            grad,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Copy of all parameter values, for early-stopping snapshots.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, s) in self.params.iter_mut().zip(snapshot) {
            p.value.copy_from_slice(s);
        }
    }
}

#[cfg(test)]
mod tests;
