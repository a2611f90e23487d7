//! Directed k-nearest-neighbor graphs over instance embeddings.
//!
//! Every node points at the `k` most cosine-similar instances of a
//! *different* lemma. Candidates are ranked by score descending, then by
//! instance id ascending, so the graph is fully determined by its inputs.
//! Construction is an exact pairwise scan parallelized over query nodes.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::{AlignedCorpus, VariantTag};

pub const DEFAULT_K: usize = 10;

/// Identifies the tie rule in exported metadata.
pub const TIE_RULE: &str = "score_desc_then_id_asc";

/// Cosine similarity accumulated in `f64`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a.to_f64_lossless(), b.to_f64_lossless());
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroNorm {
            row: usize::from(uu != 0.0),
            id: String::new(),
        });
    }
    Ok(dot / (uu.sqrt() * vv.sqrt()))
}

fn dot<T: Scalar>(u: &[T], v: &[T]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| a.to_f64_lossless() * b.to_f64_lossless())
        .fold(0.0, |acc, x| acc + x)
}

fn norm<T: Scalar>(u: &[T]) -> f64 {
    u.iter()
        .map(|a| {
            let a = a.to_f64_lossless();
            a * a
        })
        .fold(0.0, |acc, x| acc + x)
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    /// Node index (dataset record order).
    pub node: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    ids: Vec<String>,
    adjacency: Vec<Vec<Neighbor>>,
    allow_deficit: bool,
    variant: Option<VariantTag>,
}

impl NeighborGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn neighbors(&self, node: usize) -> &[Neighbor] {
        &self.adjacency[node]
    }

    /// Whether nodes may have fewer than `k` out-neighbors.
    pub fn allow_deficit(&self) -> bool {
        self.allow_deficit
    }

    pub fn variant(&self) -> Option<&VariantTag> {
        self.variant.as_ref()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, &Neighbor)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().map(move |n| (i, n)))
    }

    /// Writes the JSON-lines export: one header object, then one object per
    /// node with `[id, score]` pairs. Scores carry 9 significant digits.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            k: usize,
            nodes: usize,
            variant: Option<&'a VariantTag>,
            tie_rule: &'static str,
            allow_deficit: bool,
        }
        #[derive(Serialize)]
        struct Row<'a> {
            id: &'a str,
            neighbors: Vec<(&'a str, f64)>,
        }

        let io = |e| Error::io("<graph writer>", e);
        serde_json::to_writer(
            &mut out,
            &Header {
                k: self.k,
                nodes: self.len(),
                variant: self.variant.as_ref(),
                tie_rule: TIE_RULE,
                allow_deficit: self.allow_deficit,
            },
        )?;
        out.write_all(b"\n").map_err(io)?;
        for (i, adj) in self.adjacency.iter().enumerate() {
            let row = Row {
                id: &self.ids[i],
                neighbors: adj
                    .iter()
                    .map(|n| (self.ids[n.node].as_str(), round_significant(n.score, 9)))
                    .collect(),
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }
}

fn round_significant(x: f64, digits: usize) -> f64 {
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Ranking used everywhere: higher score first, then smaller id.
#[inline]
fn rank(ids: &[&str], a: &Neighbor, b: &Neighbor) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| ids[a.node].cmp(ids[b.node]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphOptions {
    pub k: usize,
    /// Keep nodes with fewer than `k` eligible candidates instead of failing.
    pub allow_deficit: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            allow_deficit: false,
        }
    }
}

impl GraphOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

fn eligible_count<T: Scalar>(corpus: &AlignedCorpus<'_, T>, node: usize) -> usize {
    let lemma = corpus.lemma(node);
    let same = corpus
        .dataset()
        .lemma_ids(lemma)
        .map(|v| v.len())
        .unwrap_or(1);
    corpus.len() - same
}

/// Builds the graph with the default options for `k`.
pub fn build_graph<T: Scalar>(corpus: &AlignedCorpus<'_, T>, k: usize) -> Result<NeighborGraph> {
    build_graph_with(corpus, GraphOptions::with_k(k))
}

pub fn build_graph_with<T: Scalar>(
    corpus: &AlignedCorpus<'_, T>,
    opts: GraphOptions,
) -> Result<NeighborGraph> {
    let k = opts.k;
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let n = corpus.len();
    if !opts.allow_deficit {
        for i in 0..n {
            let available = eligible_count(corpus, i);
            if available < k {
                return Err(Error::InsufficientCandidates {
                    id: corpus.id(i).to_string(),
                    available,
                    k,
                });
            }
        }
    }

    let ids: Vec<&str> = (0..n).map(|i| corpus.id(i)).collect();
    let lemmas: Vec<&str> = (0..n).map(|i| corpus.lemma(i)).collect();
    let norms: Vec<f64> = (0..n).map(|i| norm(corpus.row(i))).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroNorm {
            row: i,
            id: ids[i].to_string(),
        });
    }

    let adjacency: Vec<Vec<Neighbor>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = corpus.row(i);
            let mut cand: Vec<Neighbor> = (0..n)
                .filter(|&j| lemmas[j] != lemmas[i])
                .map(|j| Neighbor {
                    node: j,
                    score: dot(q, corpus.row(j)) / (norms[i] * norms[j]),
                })
                .collect();
            let take = k.min(cand.len());
            if take > 0 && take < cand.len() {
                cand.select_nth_unstable_by(take - 1, |a, b| rank(&ids, a, b));
                cand.truncate(take);
            }
            cand.sort_unstable_by(|a, b| rank(&ids, a, b));
            cand
        })
        .collect();

    Ok(NeighborGraph {
        k,
        ids: ids.iter().map(|s| s.to_string()).collect(),
        adjacency,
        allow_deficit: opts.allow_deficit,
        variant: Some(corpus.bundle().variant().clone()),
    })
}

/// Reference scan for a single node: scores every different-lemma instance
/// with [`cosine`], fully sorts, and keeps the first `k`.
pub fn exhaustive_neighbors<T: Scalar>(
    corpus: &AlignedCorpus<'_, T>,
    node_id: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let node = (0..corpus.len())
        .find(|&i| corpus.id(i) == node_id)
        .ok_or_else(|| Error::UnknownId(node_id.to_string()))?;
    let lemma = corpus.lemma(node);
    let q = corpus.row(node);

    let mut all = Vec::new();
    for j in 0..corpus.len() {
        if corpus.lemma(j) == lemma {
            continue;
        }
        let score = cosine(q, corpus.row(j)).map_err(|_| Error::ZeroNorm {
            row: j,
            id: corpus.id(j).to_string(),
        })?;
        all.push((corpus.id(j).to_string(), score));
    }
    if all.len() < k {
        return Err(Error::InsufficientCandidates {
            id: node_id.to_string(),
            available: all.len(),
            k,
        });
    }
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    Ok(all)
}
