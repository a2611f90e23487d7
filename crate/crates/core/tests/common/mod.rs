#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use typegraph::{Dataset, EmbeddingBundleF32, InstanceRecord, SemanticType, SentenceLabel, VariantTag};

#[derive(Debug)]
pub struct RandomCorpus {
    pub dataset: Dataset,
    pub bundle: EmbeddingBundleF32,
    pub k: usize,
}

/// Random annotated corpus. Lemmas get a random lexical type; labels are
/// drawn uniformly with a valid contextual type. With `lattice` set, vector
/// coordinates come from {-1, 0, 1} so exact score ties are frequent.
pub fn random_corpus(
    seed: u64,
    n: usize,
    lemmas: usize,
    dim: usize,
    k: usize,
    lattice: bool,
) -> RandomCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lemma_types: Vec<SemanticType> = (0..lemmas)
        .map(|_| SemanticType::ALL[rng.random_range(0..SemanticType::COUNT)])
        .collect();
    let mut records = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        let l = i % lemmas;
        let lemma = format!("w{l:02}");
        let lt = lemma_types[l];
        let label = SentenceLabel::ALL[rng.random_range(0..4)];
        let ct = match label {
            SentenceLabel::Coercion | SentenceLabel::OtherMismatch => {
                let mut ct = lt;
                while ct == lt {
                    ct = SemanticType::ALL[rng.random_range(0..SemanticType::COUNT)];
                }
                Some(ct)
            }
            _ => None,
        };
        // ids deliberately not in lemma order
        let id = format!("i{:04}", (i * 7919) % 10007);
        records.push(InstanceRecord::new(id, lemma.clone(), lemma, (0, 3), lt, label, ct).unwrap());
        loop {
            let v: Vec<f32> = (0..dim)
                .map(|_| {
                    if lattice {
                        rng.random_range(-1i32..=1) as f32
                    } else {
                        rng.random_range(-1.0f32..1.0)
                    }
                })
                .collect();
            if v.iter().any(|x| *x != 0.0) {
                data.extend(v);
                break;
            }
        }
    }
    let ids = records.iter().map(|r| r.instance_id.clone()).collect();
    RandomCorpus {
        dataset: Dataset::new(records).unwrap(),
        bundle: EmbeddingBundleF32::new(VariantTag::new("bert", false), dim, ids, data).unwrap(),
        k,
    }
}

/// The twenty corpora of the oracle-equivalence check: dims cycle through
/// {2, 8, 32, 256}, k through {1, 3, 10}, 200-500 instances over 20-50
/// lemmas; every other corpus uses lattice coordinates.
pub fn oracle_corpora() -> Vec<RandomCorpus> {
    let dims = [2, 8, 32, 256];
    let ks = [1, 3, 10];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|i| {
            let n = rng.random_range(200..=500);
            let lemmas = rng.random_range(20..=50);
            random_corpus(1000 + i as u64, n, lemmas, dims[i % 4], ks[i % 3], i % 2 == 0)
        })
        .collect()
}
