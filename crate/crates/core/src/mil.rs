//! Bag construction for weakly supervised classification: IDX container
//! parsing, the instance pool, the three bag-labeling assumptions and the
//! Gaussian-sized bag sampler.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{MilError, Result};
use crate::rng::SeededRng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Highest concept id accepted from a label file (digit classes 0-9).
pub const MAX_CONCEPT: u8 = 9;

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(MilError::Format(format!(
            "truncated header: need {end} bytes, have {}",
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parsed image stack with pixels scaled into [0, 1].
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major [count, rows, cols], each byte divided by 255.
    pub data: Vec<f64>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(MilError::Format(format!(
            "bad image magic: expected {IDX_IMAGES_MAGIC:#010x}, got {magic:#010x}"
        )));
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(MilError::Format(format!(
            "image payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let data = bytes[16..].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(IdxImages {
        count,
        rows,
        cols,
        data,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(MilError::Format(format!(
            "bad label magic: expected {IDX_LABELS_MAGIC:#010x}, got {magic:#010x}"
        )));
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(MilError::Format(format!(
            "label payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let labels = bytes[8..].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l > MAX_CONCEPT) {
        return Err(MilError::Format(format!(
            "label {bad} out of range 0..={MAX_CONCEPT}"
        )));
    }
    Ok(labels)
}

/// Serialize raw byte pixels into the IDX image container.
pub fn write_idx_images(pixels: &[u8], count: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Immutable instance store: an image stack plus per-instance concept ids.
/// The concepts drive bag labeling only; the model never sees them.
#[derive(Debug, Clone)]
pub struct InstancePool {
    /// Row-major [P, rows, cols] pixels in [0, 1].
    pub images: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub concepts: Vec<u8>,
}

impl InstancePool {
    pub fn from_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Self> {
        let images = parse_idx_images(image_bytes)?;
        let concepts = parse_idx_labels(label_bytes)?;
        if images.count != concepts.len() {
            return Err(MilError::Format(format!(
                "image count {} does not match label count {}",
                images.count,
                concepts.len()
            )));
        }
        Ok(Self {
            images: images.data,
            rows: images.rows,
            cols: images.cols,
            concepts,
        })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        let sz = self.rows * self.cols;
        &self.images[i * sz..(i + 1) * sz]
    }
}

/// Declarative bag-labeling rule. Standard is threshold with t = 1 over a
/// single concept, kept distinct because the two are reported separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssumptionRule {
    /// Positive iff the concept occurs at least once.
    Standard { concept: u8 },
    /// Positive iff every listed concept occurs at least once.
    Presence { concepts: Vec<u8> },
    /// Positive iff concept c_i occurs at least t_i times, for every pair.
    Threshold { pairs: Vec<(u8, u32)> },
}

impl AssumptionRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            AssumptionRule::Standard { .. } => Ok(()),
            AssumptionRule::Presence { concepts } if concepts.is_empty() => Err(
                MilError::Config("presence rule requires a non-empty concept set".into()),
            ),
            AssumptionRule::Presence { .. } => Ok(()),
            AssumptionRule::Threshold { pairs } => {
                if pairs.is_empty() {
                    return Err(MilError::Config(
                        "threshold rule requires at least one (concept, t) pair".into(),
                    ));
                }
                if pairs.iter().any(|&(_, t)| t < 1) {
                    return Err(MilError::Config("thresholds must be >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Bag label from the multiset of instance concepts.
    pub fn label_bag(&self, concepts: &[u8]) -> bool {
        let count = |c: u8| concepts.iter().filter(|&&x| x == c).count();
        match self {
            AssumptionRule::Standard { concept } => count(*concept) >= 1,
            AssumptionRule::Presence { concepts: req } => req.iter().all(|&c| count(c) >= 1),
            AssumptionRule::Threshold { pairs } => {
                pairs.iter().all(|&(c, t)| count(c) >= t as usize)
            }
        }
    }
}

/// Gaussian bag-size sampler configuration.
#[derive(Debug, Clone)]
pub struct BagSamplerConfig {
    pub mean: f64,
    pub stddev: f64,
    pub min_size: usize,
    /// Rejection-sample towards a 50/50 positive/negative split.
    pub balance: bool,
    pub seed: u64,
}

impl Default for BagSamplerConfig {
    fn default() -> Self {
        Self {
            mean: 10.0,
            stddev: 2.0,
            min_size: 1,
            balance: true,
            seed: 0,
        }
    }
}

impl BagSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mean <= 0.0 || self.stddev < 0.0 || self.min_size < 1 {
            return Err(MilError::Config(format!(
                "bag sampler requires mean > 0, stddev >= 0, min_size >= 1 (got {}, {}, {})",
                self.mean, self.stddev, self.min_size
            )));
        }
        Ok(())
    }
}

/// A sampled bag: pool indices, their hidden concepts and the bag label.
#[derive(Debug, Clone)]
pub struct Bag {
    pub indices: Vec<usize>,
    pub concepts: Vec<u8>,
    pub label: bool,
}

impl Bag {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Copy the bag's pixels out of the pool as [N, 1, rows, cols] data.
    pub fn gather(&self, pool: &InstancePool) -> Vec<f64> {
        let sz = pool.rows * pool.cols;
        let mut out = Vec::with_capacity(self.indices.len() * sz);
        for &i in &self.indices {
            out.extend_from_slice(pool.instance(i));
        }
        out
    }
}

/// Bag size: round-to-nearest Gaussian draw, clamped below at `min_size`.
pub fn sample_bag_size(rng: &mut SeededRng, cfg: &BagSamplerConfig) -> usize {
    let draw = rng.normal_scaled(cfg.mean, cfg.stddev);
    let rounded = libm::round(draw);
    if rounded < cfg.min_size as f64 {
        cfg.min_size
    } else {
        rounded as usize
    }
}

const BALANCE_REJECTION_BUDGET: usize = 10_000;

/// Draw `count` bags with replacement from the pool. With `balance` set the
/// sampler rejection-samples until positives reach ceil(count / 2) and
/// negatives floor(count / 2).
pub fn sample_bags(
    pool: &InstancePool,
    rule: &AssumptionRule,
    cfg: &BagSamplerConfig,
    count: usize,
) -> Result<Vec<Bag>> {
    if pool.is_empty() {
        return Err(MilError::Sampling("instance pool is empty".into()));
    }
    rule.validate()?;
    cfg.validate()?;
    let mut rng = SeededRng::with_stream(cfg.seed, 0xba65);
    let want_pos = count.div_ceil(2);
    let want_neg = count / 2;
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    let mut rejections = 0usize;
    let mut bags = Vec::with_capacity(count);
    while bags.len() < count {
        let n = sample_bag_size(&mut rng, cfg);
        let indices: Vec<usize> = (0..n).map(|_| rng.below(pool.len())).collect();
        let concepts: Vec<u8> = indices.iter().map(|&i| pool.concepts[i]).collect();
        let label = rule.label_bag(&concepts);
        if cfg.balance {
            let quota_left = if label {
                n_pos < want_pos
            } else {
                n_neg < want_neg
            };
            if !quota_left {
                rejections += 1;
                if rejections > BALANCE_REJECTION_BUDGET {
                    return Err(MilError::Sampling(format!(
                        "class balancing exceeded {BALANCE_REJECTION_BUDGET} rejections \
                         ({n_pos} positive / {n_neg} negative of {count}); \
                         the rule may be unsatisfiable on this pool"
                    )));
                }
                continue;
            }
        }
        if label {
            n_pos += 1;
        } else {
            n_neg += 1;
        }
        bags.push(Bag {
            indices,
            concepts,
            label,
        });
    }
    Ok(bags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_image_file() -> Vec<u8> {
        // one 1x1 image with value 255
        let mut b = vec![0x00, 0x00, 0x08, 0x03];
        b.extend_from_slice(&1u32.to_be_bytes());
        b.extend_from_slice(&1u32.to_be_bytes());
        b.extend_from_slice(&1u32.to_be_bytes());
        b.push(0xFF);
        b
    }

    #[test]
    fn parses_minimal_image_file() {
        let parsed = parse_idx_images(&minimal_image_file()).unwrap();
        assert_eq!(
            (parsed.count, parsed.rows, parsed.cols),
            (1, 1, 1)
        );
        assert_eq!(parsed.data, vec![1.0]);
    }

    #[test]
    fn zero_byte_scales_to_zero() {
        let mut bytes = minimal_image_file();
        *bytes.last_mut().unwrap() = 0x00;
        assert_eq!(parse_idx_images(&bytes).unwrap().data, vec![0.0]);
    }

    #[test]
    fn truncated_image_payload_is_rejected() {
        let mut bytes = minimal_image_file();
        bytes[7] = 2; // claim two images, provide one byte
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(matches!(err, MilError::Format(_)), "{err}");
    }

    #[test]
    fn wrong_magic_reports_observed_value() {
        let mut bytes = minimal_image_file();
        bytes[3] = 0x01;
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(alloc::format!("{err}").contains("0x00000801"), "{err}");
    }

    #[test]
    fn parses_label_file() {
        let mut b = vec![0x00, 0x00, 0x08, 0x01];
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&[7, 9]);
        assert_eq!(parse_idx_labels(&b).unwrap(), vec![7, 9]);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let mut b = vec![0x00, 0x00, 0x08, 0x01];
        b.extend_from_slice(&1u32.to_be_bytes());
        b.push(0x0A);
        assert!(parse_idx_labels(&b).is_err());
    }

    #[test]
    fn empty_label_file_is_fine() {
        let mut b = vec![0x00, 0x00, 0x08, 0x01];
        b.extend_from_slice(&0u32.to_be_bytes());
        assert_eq!(parse_idx_labels(&b).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn label_rules_match_hand_cases() {
        let standard = AssumptionRule::Standard { concept: 9 };
        assert!(standard.label_bag(&[1, 9, 3]));
        assert!(!standard.label_bag(&[1, 2, 3]));

        let presence = AssumptionRule::Presence {
            concepts: vec![9, 7],
        };
        assert!(!presence.label_bag(&[9, 9, 1]));
        assert!(presence.label_bag(&[9, 7, 0]));

        let threshold = AssumptionRule::Threshold {
            pairs: vec![(9, 2)],
        };
        assert!(threshold.label_bag(&[9, 1, 9]));
        assert!(!threshold.label_bag(&[9, 1]));
    }

    fn uniform_pool(per_class: usize) -> InstancePool {
        let p = per_class * 10;
        InstancePool {
            images: vec![0.5; p * 4],
            rows: 2,
            cols: 2,
            concepts: (0..p).map(|i| (i % 10) as u8).collect(),
        }
    }

    #[test]
    fn degenerate_gaussian_gives_fixed_sizes() {
        let pool = uniform_pool(5);
        let cfg = BagSamplerConfig {
            stddev: 0.0,
            balance: false,
            ..Default::default()
        };
        let bags = sample_bags(&pool, &AssumptionRule::Standard { concept: 9 }, &cfg, 20).unwrap();
        assert!(bags.iter().all(|b| b.len() == 10));
    }

    #[test]
    fn balanced_sampling_hits_quotas() {
        let pool = uniform_pool(5);
        let cfg = BagSamplerConfig {
            seed: 11,
            ..Default::default()
        };
        let bags = sample_bags(&pool, &AssumptionRule::Standard { concept: 9 }, &cfg, 21).unwrap();
        let pos = bags.iter().filter(|b| b.label).count();
        assert_eq!(pos, 11);
        assert_eq!(bags.len() - pos, 10);
    }

    #[test]
    fn unsatisfiable_balance_errors_out() {
        // concept 9 never occurs, so positives cannot be sampled
        let pool = InstancePool {
            images: vec![0.0; 40],
            rows: 2,
            cols: 2,
            concepts: vec![1; 10],
        };
        let cfg = BagSamplerConfig::default();
        let err =
            sample_bags(&pool, &AssumptionRule::Standard { concept: 9 }, &cfg, 4).unwrap_err();
        assert!(matches!(err, MilError::Sampling(_)), "{err}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let pool = uniform_pool(3);
        let cfg = BagSamplerConfig {
            seed: 99,
            ..Default::default()
        };
        let rule = AssumptionRule::Standard { concept: 9 };
        let a = sample_bags(&pool, &rule, &cfg, 15).unwrap();
        let b = sample_bags(&pool, &rule, &cfg, 15).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.indices, y.indices);
            assert_eq!(x.label, y.label);
        }
    }

    #[test]
    fn idx_round_trip_is_bit_identical() {
        let mut rng = crate::rng::SeededRng::new(5);
        let pixels: Vec<u8> = (0..3 * 4 * 4).map(|_| rng.below(256) as u8).collect();
        let bytes = write_idx_images(&pixels, 3, 4, 4);
        let parsed = parse_idx_images(&bytes).unwrap();
        let expected: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
        assert_eq!(parsed.data, expected);
    }
}
