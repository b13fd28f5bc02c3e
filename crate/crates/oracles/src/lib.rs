//! Independent reference implementations used as test oracles.
//!
//! Everything here is written in the most direct way possible — nested
//! loops, `Vec<Vec<f64>>` matrices, textbook formulas — and shares no code
//! with the optimized core crate. Agreement between the two is what the
//! integration tests check.

/// Row-major dense matrix as a vector of rows.
pub type Mat = Vec<Vec<f64>>;

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// Plain triple-loop matrix product.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (m, k) = (a.len(), a[0].len());
    let n = b[0].len();
    assert_eq!(k, b.len());
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let (m, n) = (a.len(), a[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..m {
        for j in 0..n {
            out[j][i] = a[i][j];
        }
    }
    out
}

/// y = W x + b with W as rows.
pub fn linear(w: &Mat, b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().zip(x).map(|(&wv, &xv)| wv * xv).sum::<f64>() + bi)
        .collect()
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn tanh_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.tanh()).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax of one slice, computed the textbook way (no max subtraction; the
/// tests feed it moderate values only).
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let exps: Vec<f64> = x.iter().map(|&v| v.exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

// ---------------------------------------------------------------------------
// Convolution / pooling
// ---------------------------------------------------------------------------

/// One image [C][H][W] convolved with filters [OC][C][KH][KW], valid
/// output, cross-correlation orientation.
pub fn conv2d(
    image: &[Vec<Vec<f64>>],
    filters: &[Vec<Vec<Vec<f64>>>],
    bias: &[f64],
    stride: usize,
) -> Vec<Vec<Vec<f64>>> {
    let c = image.len();
    let (h, w) = (image[0].len(), image[0][0].len());
    let oc = filters.len();
    let (kh, kw) = (filters[0][0].len(), filters[0][0][0].len());
    let oh = (h - kh) / stride + 1;
    let ow = (w - kw) / stride + 1;
    let mut out = vec![vec![vec![0.0; ow]; oh]; oc];
    for o in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o];
                for ci in 0..c {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            acc += filters[o][ci][dy][dx]
                                * image[ci][y * stride + dy][x * stride + dx];
                        }
                    }
                }
                out[o][y][x] = acc;
            }
        }
    }
    out
}

/// Non-overlapping max pooling of one [C][H][W] volume.
pub fn maxpool2d(image: &[Vec<Vec<f64>>], window: usize) -> Vec<Vec<Vec<f64>>> {
    let c = image.len();
    let (h, w) = (image[0].len(), image[0][0].len());
    let (oh, ow) = (h / window, w / window);
    let mut out = vec![vec![vec![f64::NEG_INFINITY; ow]; oh]; c];
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                for dy in 0..window {
                    for dx in 0..window {
                        let v = image[ci][y * window + dy][x * window + dx];
                        if v > out[ci][y][x] {
                            out[ci][y][x] = v;
                        }
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Similarity kernels (vector -> vector)
// ---------------------------------------------------------------------------

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn l2sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
}

pub fn rbf(a: &[f64], b: &[f64], alpha: f64) -> f64 {
    (-alpha * l2sq(a, b)).exp()
}

pub fn inverse_quadratic(a: &[f64], b: &[f64], alpha: f64) -> f64 {
    1.0 / (alpha * l2sq(a, b) + 1.0)
}

pub fn laplace(a: &[f64], b: &[f64]) -> f64 {
    -l1(a, b)
}

pub fn module(a: &[f64], b: &[f64], alpha: f64) -> f64 {
    let norm = |v: &[f64]| dot(v, v).sqrt();
    l2sq(a, b).sqrt().powf(alpha) - norm(a).powf(alpha) - norm(b).powf(alpha)
}

// ---------------------------------------------------------------------------
// Attention pooling and kernel self-attention
// ---------------------------------------------------------------------------

/// a_i = softmax_i(w^T tanh(V h_i)), pooled = sum_i a_i h_i.
/// `h` holds instance embeddings as rows, `v` is [M][L], `w` is [M].
pub fn attention_pool(h: &Mat, v: &Mat, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let logits: Vec<f64> = h
        .iter()
        .map(|hi| {
            let hidden = tanh_vec(&linear(v, &vec![0.0; v.len()], hi));
            dot(w, &hidden)
        })
        .collect();
    let weights = softmax(&logits);
    let l = h[0].len();
    let mut pooled = vec![0.0; l];
    for (ai, hi) in weights.iter().zip(h) {
        for (p, &x) in pooled.iter_mut().zip(hi) {
            *p += ai * x;
        }
    }
    (pooled, weights)
}

/// Kernel self-attention with the gamma-gated residual:
/// h_j' = gamma * sum_i beta[j][i] (W_v h_i) + h_j, where
/// beta[j][i] = softmax over i of score(K_i, Q_j), K_i = W_k h_i,
/// Q_j = W_q h_j. Returns (mixed rows, beta rows).
pub fn self_attention(
    h: &Mat,
    w_q: &Mat,
    w_k: &Mat,
    w_v: &Mat,
    gamma: f64,
    score: &dyn Fn(&[f64], &[f64]) -> f64,
) -> (Mat, Mat) {
    let n = h.len();
    let zeros_q = vec![0.0; w_q.len()];
    let zeros_v = vec![0.0; w_v.len()];
    let keys: Mat = h.iter().map(|hi| linear(w_k, &zeros_q, hi)).collect();
    let queries: Mat = h.iter().map(|hi| linear(w_q, &zeros_q, hi)).collect();
    let values: Mat = h.iter().map(|hi| linear(w_v, &zeros_v, hi)).collect();
    let mut beta = Vec::with_capacity(n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| score(&keys[i], &queries[j])).collect();
        beta.push(softmax(&col));
    }
    let mut mixed = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = h[j].clone();
        for i in 0..n {
            for (r, &v) in row.iter_mut().zip(&values[i]) {
                *r += gamma * beta[j][i] * v;
            }
        }
        mixed.push(row);
    }
    (mixed, beta)
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// AUC by direct comparison of every (positive, negative) pair, ties half.
pub fn auc_pairs(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, (&sp, &lp)) in scores.iter().zip(labels).enumerate() {
        if !lp {
            continue;
        }
        for (j, (&sn, &ln)) in scores.iter().zip(labels).enumerate() {
            if ln || i == j {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    if pairs == 0.0 {
        None
    } else {
        Some(wins / pairs)
    }
}

/// Binary cross-entropy of one probability against a boolean label, with the
/// same clamp the trainer applies.
pub fn bce(p: f64, label: bool) -> f64 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

// ---------------------------------------------------------------------------
// Optimizer reference
// ---------------------------------------------------------------------------

/// One scalar Adam coordinate carried across steps.
#[derive(Debug, Clone, Default)]
pub struct AdamScalar {
    pub m: f64,
    pub v: f64,
}

impl AdamScalar {
    /// Bias-corrected update; `t` is the 1-based step number. Returns the
    /// new parameter value.
    pub fn step(
        &mut self,
        value: f64,
        grad: f64,
        t: u32,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> f64 {
        self.m = beta1 * self.m + (1.0 - beta1) * grad;
        self.v = beta2 * self.v + (1.0 - beta2) * grad * grad;
        let m_hat = self.m / (1.0 - beta1.powi(t as i32));
        let v_hat = self.v / (1.0 - beta2.powi(t as i32));
        value - lr * m_hat / (v_hat.sqrt() + eps)
    }
}

// ---------------------------------------------------------------------------
// Bag labeling and sampling statistics
// ---------------------------------------------------------------------------

/// At-least-once rule, counted by scanning.
pub fn label_standard(bag: &[u8], concept: u8) -> bool {
    bag.contains(&concept)
}

/// Every listed concept must occur at least once.
pub fn label_presence(bag: &[u8], concepts: &[u8]) -> bool {
    concepts.iter().all(|c| bag.contains(c))
}

/// Every (concept, t) pair must be satisfied; counts via a 256-wide table.
pub fn label_threshold(bag: &[u8], pairs: &[(u8, u32)]) -> bool {
    let mut counts = [0u32; 256];
    for &b in bag {
        counts[b as usize] += 1;
    }
    pairs.iter().all(|&(c, t)| counts[c as usize] >= t)
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn choose(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// P[at least `t` successes in `n` draws with success probability `q`]:
/// the upper binomial tail. With t = 1 this is 1 - (1 - q)^n, the chance a
/// uniformly drawn bag of size n contains a concept of frequency q.
pub fn binomial_tail(n: u32, q: f64, t: u32) -> f64 {
    (t..=n)
        .map(|j| choose(n, j) * q.powi(j as i32) * (1.0 - q).powi((n - j) as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_case() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let b = vec![vec![5.0], vec![6.0]];
        assert_eq!(matmul(&a, &b), vec![vec![17.0], vec![39.0]]);
    }

    #[test]
    fn softmax_uniform() {
        let s = softmax(&[1.0, 1.0]);
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conv_ones() {
        let image = vec![vec![vec![1.0; 3]; 3]];
        let filters = vec![vec![vec![vec![1.0; 2]; 2]]];
        let out = conv2d(&image, &filters, &[0.0], 1);
        assert_eq!(out, vec![vec![vec![4.0; 2]; 2]]);
    }

    #[test]
    fn maxpool_picks_max() {
        let image = vec![vec![vec![1.0, 5.0], vec![2.0, 3.0]]];
        assert_eq!(maxpool2d(&image, 2), vec![vec![vec![5.0]]]);
    }

    #[test]
    fn module_alpha_two_is_minus_two_dot() {
        let a = [1.0, -2.0, 0.5];
        let b = [0.3, 0.7, -1.1];
        let lhs = module(&a, &b, 2.0);
        assert!((lhs - (-2.0 * dot(&a, &b))).abs() < 1e-12);
    }

    #[test]
    fn auc_pairs_hand_cases() {
        assert_eq!(
            auc_pairs(&[0.9, 0.1], &[true, false]),
            Some(1.0)
        );
        assert_eq!(auc_pairs(&[0.5, 0.5], &[true, false]), Some(0.5));
        assert_eq!(auc_pairs(&[0.5, 0.6], &[true, true]), None);
    }

    #[test]
    fn binomial_tail_t1_closed_form() {
        let n: i32 = 10;
        let q: f64 = 0.1;
        let closed = 1.0 - (1.0 - q).powi(n);
        assert!((binomial_tail(n as u32, q, 1) - closed).abs() < 1e-12);
    }

    #[test]
    fn binomial_tail_enumeration() {
        // Enumerate all 2^4 outcomes with q = 0.5.
        let p = binomial_tail(4, 0.5, 2);
        let count = (0u32..16).filter(|x| x.count_ones() >= 2).count();
        assert!((p - count as f64 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn labeling_rules() {
        let bag = [3, 1, 4, 1, 5];
        assert!(label_standard(&bag, 4));
        assert!(!label_standard(&bag, 9));
        assert!(label_presence(&bag, &[1, 3, 5]));
        assert!(!label_presence(&bag, &[1, 2]));
        assert!(label_threshold(&bag, &[(1, 2)]));
        assert!(!label_threshold(&bag, &[(1, 3)]));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With any nonzero gradient, the bias-corrected first step has
        // magnitude ~lr (for eps << |g|).
        let mut a = AdamScalar::default();
        let next = a.step(1.0, 0.5, 1, 0.01, 0.9, 0.999, 1e-8);
        assert!((next - (1.0 - 0.01)).abs() < 1e-6);
    }
}
