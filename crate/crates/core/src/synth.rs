//! Synthetic datasets and embedding bundles with controlled type geometry.
//!
//! Generation, for a given seed, is one sequential ChaCha8 stream:
//!
//! 1. Ten type centroids: standard normal vectors scaled to unit length,
//!    redrawn as a whole until every pair is at least
//!    `4 * within_type_sigma` apart (bounded attempts).
//! 2. Records: for each type in canonical order, `lemmas_per_type` lemmas
//!    named `<type>_<j>`, each with `instances_per_lemma` instances.
//! 3. Labels: the instance list is shuffled; the first
//!    `round(n * coercion_fraction)` become coercion (contextual type drawn
//!    uniformly from the other nine), the next
//!    `round(n * unrestricted_fraction)` unrestricted, the rest matching.
//! 4. Vectors, per record in order, plain noise drawn before masked noise:
//!    * plain: `centroid(lt) + N(0, sigma^2)`, except coercion which uses
//!      `(1 - mix) * centroid(lt) + mix * centroid(ct)` as its center;
//!    * masked: matching at `centroid(lt)`, coercion at `centroid(ct)`,
//!      both with `N(0, masked_sigma^2)`; unrestricted at the centroid
//!      mean with `N(0, (3 * masked_sigma)^2)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, InstanceRecord, SemanticType, SentenceLabel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::{EmbeddingBundle, VariantTag};

pub const MAX_CENTROID_ATTEMPTS: usize = 1000;
pub const SYNTH_MODEL_ID: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub dim: usize,
    pub lemmas_per_type: usize,
    pub instances_per_lemma: usize,
    pub within_type_sigma: f64,
    pub coercion_fraction: f64,
    pub unrestricted_fraction: f64,
    /// Weight of the contextual centroid in plain coercion vectors.
    pub coercion_mix: f64,
    pub masked_context_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dim: 32,
            lemmas_per_type: 5,
            instances_per_lemma: 12,
            within_type_sigma: 0.1,
            coercion_fraction: 0.1,
            unrestricted_fraction: 0.1,
            coercion_mix: 0.5,
            masked_context_sigma: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.lemmas_per_type == 0 || self.instances_per_lemma == 0 {
            return bad("lemmas_per_type and instances_per_lemma must be positive");
        }
        if !(self.within_type_sigma > 0.0 && self.within_type_sigma.is_finite()) {
            return bad("within_type_sigma must be positive");
        }
        if !(self.masked_context_sigma > 0.0 && self.masked_context_sigma.is_finite()) {
            return bad("masked_context_sigma must be positive");
        }
        if !unit(self.coercion_fraction) || !unit(self.unrestricted_fraction) {
            return bad("label fractions must lie in [0, 1]");
        }
        if self.coercion_fraction + self.unrestricted_fraction > 1.0 {
            return bad("coercion_fraction + unrestricted_fraction must not exceed 1");
        }
        if !unit(self.coercion_mix) {
            return bad("coercion_mix must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn total_instances(&self) -> usize {
        SemanticType::COUNT * self.lemmas_per_type * self.instances_per_lemma
    }

    /// Number of (coercion, unrestricted) records generated.
    pub fn label_counts(&self) -> (usize, usize) {
        let n = self.total_instances();
        let c = ((n as f64) * self.coercion_fraction).round() as usize;
        let u = ((n as f64) * self.unrestricted_fraction).round() as usize;
        (c.min(n), u.min(n - c.min(n)))
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput<T: Scalar> {
    pub dataset: Dataset,
    pub plain: EmbeddingBundle<T>,
    pub masked: EmbeddingBundle<T>,
}

fn centroids(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let min_sep = 4.0 * cfg.within_type_sigma;
    for _ in 0..MAX_CENTROID_ATTEMPTS {
        let cs: Vec<Vec<f64>> = (0..SemanticType::COUNT)
            .map(|_| {
                let v: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();
        let separated = (0..cs.len()).all(|i| {
            ((i + 1)..cs.len()).all(|j| {
                let d2: f64 = cs[i].iter().zip(&cs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= min_sep
            })
        });
        if separated {
            return Ok(cs);
        }
    }
    Err(Error::CentroidSeparation {
        types: SemanticType::COUNT,
        min_separation: min_sep,
        dim: cfg.dim,
        attempts: MAX_CENTROID_ATTEMPTS,
    })
}

fn around(center: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma).expect("sigma validated positive");
    center.iter().map(|c| c + noise.sample(rng)).collect()
}

/// Generates a dataset and its plain and masked bundles; see the module
/// docs for the exact procedure.
pub fn generate<T: Scalar>(cfg: &SynthConfig) -> Result<SynthOutput<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cs = centroids(cfg, &mut rng)?;
    let global_mean: Vec<f64> = (0..cfg.dim)
        .map(|d| cs.iter().map(|c| c[d]).sum::<f64>() / cs.len() as f64)
        .collect();

    let mut slots: Vec<(String, String, SemanticType)> = Vec::with_capacity(cfg.total_instances());
    for t in SemanticType::ALL {
        for j in 0..cfg.lemmas_per_type {
            let lemma = format!("{t}_{j}");
            for i in 0..cfg.instances_per_lemma {
                slots.push((format!("{lemma}-{i:03}"), lemma.clone(), t));
            }
        }
    }

    let n = slots.len();
    let (n_coercion, n_unrestricted) = cfg.label_counts();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![(SentenceLabel::Matching, None); n];
    for (rank, &i) in order.iter().enumerate() {
        let lt = slots[i].2;
        labels[i] = if rank < n_coercion {
            let k = rng.random_range(0..SemanticType::COUNT - 1);
            let others: Vec<SemanticType> =
                SemanticType::ALL.iter().copied().filter(|&t| t != lt).collect();
            (SentenceLabel::Coercion, Some(others[k]))
        } else if rank < n_coercion + n_unrestricted {
            (SentenceLabel::Unrestricted, None)
        } else {
            (SentenceLabel::Matching, None)
        };
    }

    let mut records = Vec::with_capacity(n);
    let mut plain = Vec::with_capacity(n * cfg.dim);
    let mut masked = Vec::with_capacity(n * cfg.dim);
    for ((id, lemma, lt), (label, ct)) in slots.into_iter().zip(labels) {
        let sentence = format!("a synthetic sentence about the {lemma} here");
        let start = "a synthetic sentence about the ".chars().count();
        let span = (start, start + lemma.chars().count());

        let lexical = &cs[lt.index()];
        let p = match ct {
            Some(ct) => {
                let contextual = &cs[ct.index()];
                let center: Vec<f64> = lexical
                    .iter()
                    .zip(contextual)
                    .map(|(a, b)| (1.0 - cfg.coercion_mix) * a + cfg.coercion_mix * b)
                    .collect();
                around(&center, cfg.within_type_sigma, &mut rng)
            }
            None => around(lexical, cfg.within_type_sigma, &mut rng),
        };
        let m = match label {
            SentenceLabel::Coercion => {
                let ct = ct.expect("coercion carries a contextual type");
                around(&cs[ct.index()], cfg.masked_context_sigma, &mut rng)
            }
            SentenceLabel::Unrestricted => {
                around(&global_mean, 3.0 * cfg.masked_context_sigma, &mut rng)
            }
            _ => around(lexical, cfg.masked_context_sigma, &mut rng),
        };
        plain.extend(p.into_iter().map(T::from_f64_lossy));
        masked.extend(m.into_iter().map(T::from_f64_lossy));
        records.push(InstanceRecord::new(id, lemma, sentence, span, lt, label, ct)?);
    }

    let ids: Vec<String> = records.iter().map(|r| r.instance_id.clone()).collect();
    let dataset = Dataset::new(records)?;
    Ok(SynthOutput {
        plain: EmbeddingBundle::new(VariantTag::new(SYNTH_MODEL_ID, false), cfg.dim, ids.clone(), plain)?,
        masked: EmbeddingBundle::new(VariantTag::new(SYNTH_MODEL_ID, true), cfg.dim, ids, masked)?,
        dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset_summary;

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let c = SynthConfig {
            coercion_fraction: 0.6,
            unrestricted_fraction: 0.5,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = SynthConfig {
            within_type_sigma: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn label_proportions() {
        let cfg = SynthConfig {
            coercion_fraction: 0.15,
            unrestricted_fraction: 0.05,
            ..Default::default()
        };
        let out = generate::<f32>(&cfg).unwrap();
        let s = dataset_summary(&out.dataset);
        assert_eq!(s.total, 600);
        assert_eq!(s.by_label[&SentenceLabel::Coercion], 90);
        assert_eq!(s.by_label[&SentenceLabel::Unrestricted], 30);
        assert_eq!(s.by_label[&SentenceLabel::Matching], 480);
        assert!(s.by_lexical_type.values().all(|&c| c == 60));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig::default();
        let a = generate::<f32>(&cfg).unwrap();
        let b = generate::<f32>(&cfg).unwrap();
        assert_eq!(a.plain.vector_bytes(), b.plain.vector_bytes());
        assert_eq!(a.masked.vector_bytes(), b.masked.vector_bytes());
        assert_eq!(a.dataset, b.dataset);
        let c = generate::<f32>(&SynthConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.plain.vector_bytes(), c.plain.vector_bytes());
    }

    #[test]
    fn unsatisfiable_separation() {
        let cfg = SynthConfig {
            dim: 2,
            within_type_sigma: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            generate::<f32>(&cfg),
            Err(Error::CentroidSeparation { .. })
        ));
    }
}
