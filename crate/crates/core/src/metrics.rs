//! Per-instance neighbor-type metrics.
//!
//! For a node `v` with out-neighbors `N(v)`, the neighbor type probability
//! of type `t` is the share of `N(v)` whose lexical type is `t`, over `k`.
//! The lexical and contextual matching ratios read that distribution at the
//! node's own lexical and contextual type; the neighbor type entropy is its
//! Shannon entropy in nats.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, SemanticType, SentenceLabel};
use crate::error::{Error, Result};
use crate::knn::NeighborGraph;
use crate::scalar::Scalar;

/// Logarithm base used for entropy, recorded in exported metadata.
pub const LOG_BASE: &str = "e";

/// Dense distribution over the ten semantic types, canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeDistribution<T: Scalar> {
    probs: [T; SemanticType::COUNT],
}

impl<T: Scalar> Default for TypeDistribution<T> {
    fn default() -> Self {
        Self {
            probs: [T::zero(); SemanticType::COUNT],
        }
    }
}

impl<T: Scalar> TypeDistribution<T> {
    pub fn from_array(probs: [T; SemanticType::COUNT]) -> Self {
        Self { probs }
    }

    /// Counts divided by `denominator`. A zero denominator yields the zero
    /// vector (a node without neighbors in deficit mode).
    pub fn from_counts(counts: &[usize; SemanticType::COUNT], denominator: usize) -> Self {
        let mut probs = [T::zero(); SemanticType::COUNT];
        if denominator > 0 {
            let d = T::from_usize_lossy(denominator);
            for (p, &c) in probs.iter_mut().zip(counts) {
                *p = T::from_usize_lossy(c) / d;
            }
        }
        Self { probs }
    }

    pub fn get(&self, t: SemanticType) -> T {
        self.probs[t.index()]
    }

    pub fn as_array(&self) -> &[T; SemanticType::COUNT] {
        &self.probs
    }

    pub fn sum(&self) -> T {
        self.probs.iter().copied().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SemanticType, T)> + '_ {
        SemanticType::ALL.iter().map(move |&t| (t, self.get(t)))
    }
}

/// Entropy `-sum p ln p` with `0 ln 0 = 0`, accumulated in `f64`.
pub fn nte<T: Scalar>(dist: &TypeDistribution<T>) -> T {
    let h = dist
        .as_array()
        .iter()
        .map(|p| p.to_f64_lossless())
        .filter(|&p| p > 0.0)
        .fold(0.0f64, |acc, p| acc - p * p.ln());
    // -0.0 for a pure neighborhood
    T::from_f64_lossy(h.max(0.0))
}

fn resolve_type(dataset: &Dataset, id: &str) -> Result<SemanticType> {
    dataset
        .get(id)
        .map(|r| r.lexical_type)
        .ok_or_else(|| Error::UnknownId(id.to_string()))
}

/// Neighbor type probabilities of `node`, counting each neighbor under its
/// lexical type. The denominator is `k`, or the node's out-degree when the
/// graph was built with deficits allowed.
pub fn ntp<T: Scalar>(
    graph: &NeighborGraph,
    dataset: &Dataset,
    node: &str,
) -> Result<TypeDistribution<T>> {
    let i = graph
        .node(node)
        .ok_or_else(|| Error::UnknownId(node.to_string()))?;
    ntp_at(graph, dataset, i)
}

fn ntp_at<T: Scalar>(
    graph: &NeighborGraph,
    dataset: &Dataset,
    i: usize,
) -> Result<TypeDistribution<T>> {
    let mut counts = [0usize; SemanticType::COUNT];
    for n in graph.neighbors(i) {
        counts[resolve_type(dataset, graph.id(n.node))?.index()] += 1;
    }
    let denominator = if graph.allow_deficit() {
        graph.neighbors(i).len()
    } else {
        graph.k()
    };
    Ok(TypeDistribution::from_counts(&counts, denominator))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow<T: Scalar> {
    pub instance_id: String,
    pub label: SentenceLabel,
    pub lexical_type: SemanticType,
    pub contextual_type: Option<SemanticType>,
    pub ntp: TypeDistribution<T>,
    pub ntmr_l: T,
    /// Present only when the contextual type differs from the lexical type.
    pub ntmr_c: Option<T>,
    pub other_ratio: T,
    pub nte: T,
}

impl<T: Scalar> MetricRow<T> {
    /// Derives every metric field from an NTP distribution.
    pub fn from_distribution(
        instance_id: impl Into<String>,
        label: SentenceLabel,
        lexical_type: SemanticType,
        contextual_type: Option<SemanticType>,
        ntp: TypeDistribution<T>,
    ) -> Self {
        let ntmr_l = ntp.get(lexical_type);
        let ntmr_c = contextual_type
            .filter(|&ct| ct != lexical_type)
            .map(|ct| ntp.get(ct));
        let other_ratio = T::one() - ntmr_l - ntmr_c.unwrap_or_else(T::zero);
        Self {
            instance_id: instance_id.into(),
            label,
            lexical_type,
            contextual_type,
            nte: nte(&ntp),
            ntp,
            ntmr_l,
            ntmr_c,
            other_ratio,
        }
    }
}

pub fn metric_row<T: Scalar>(
    graph: &NeighborGraph,
    dataset: &Dataset,
    node: &str,
) -> Result<MetricRow<T>> {
    let i = graph
        .node(node)
        .ok_or_else(|| Error::UnknownId(node.to_string()))?;
    metric_row_at(graph, dataset, i)
}

fn metric_row_at<T: Scalar>(
    graph: &NeighborGraph,
    dataset: &Dataset,
    i: usize,
) -> Result<MetricRow<T>> {
    let id = graph.id(i);
    let rec = dataset
        .get(id)
        .ok_or_else(|| Error::UnknownId(id.to_string()))?;
    Ok(MetricRow::from_distribution(
        id,
        rec.label,
        rec.lexical_type,
        rec.contextual_type,
        ntp_at(graph, dataset, i)?,
    ))
}

/// How NTP values were normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NtpDenominator {
    K,
    OutDegree,
}

/// Metric rows for every node of one graph, in graph node order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable<T: Scalar> {
    pub k: usize,
    pub denominator: NtpDenominator,
    pub rows: Vec<MetricRow<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricMeta {
    pub k: usize,
    pub ntp_denominator: NtpDenominator,
    pub log_base: String,
    pub neighbor_type: String,
    pub tie_rule: String,
}

impl<T: Scalar> MetricTable<T> {
    pub fn meta(&self) -> MetricMeta {
        MetricMeta {
            k: self.k,
            ntp_denominator: self.denominator,
            log_base: LOG_BASE.to_string(),
            neighbor_type: "lexical".to_string(),
            tie_rule: crate::knn::TIE_RULE.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn by_label(&self, label: SentenceLabel) -> impl Iterator<Item = &MetricRow<T>> {
        self.rows.iter().filter(move |r| r.label == label)
    }

    /// NTE values of all rows with `label`, as `f64`.
    pub fn nte_sample(&self, label: SentenceLabel) -> Vec<f64> {
        self.by_label(label).map(|r| r.nte.to_f64_lossless()).collect()
    }
}

/// Computes metric rows for every node; parallel over nodes, output in node
/// order.
pub fn compute_metrics<T: Scalar>(graph: &NeighborGraph, dataset: &Dataset) -> Result<MetricTable<T>> {
    let rows = (0..graph.len())
        .into_par_iter()
        .map(|i| metric_row_at(graph, dataset, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricTable {
        k: graph.k(),
        denominator: if graph.allow_deficit() {
            NtpDenominator::OutDegree
        } else {
            NtpDenominator::K
        },
        rows,
    })
}

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "id",
        "label",
        "lexical_type",
        "contextual_type",
        "ntmr_l",
        "ntmr_c",
        "other_ratio",
        "nte",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(SemanticType::ALL.iter().map(|t| format!("ntp_{t}")));
    h
}

fn fmt6<T: Scalar>(x: T) -> String {
    format!("{:.6}", x.to_f64_lossless())
}

/// Writes the metric CSV (6 decimals, empty field for absent values).
pub fn write_metrics_csv<T: Scalar, W: Write>(table: &MetricTable<T>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(csv_header())?;
    for r in &table.rows {
        let mut rec = vec![
            r.instance_id.clone(),
            r.label.to_string(),
            r.lexical_type.to_string(),
            r.contextual_type.map(|t| t.to_string()).unwrap_or_default(),
            fmt6(r.ntmr_l),
            r.ntmr_c.map(fmt6).unwrap_or_default(),
            fmt6(r.other_ratio),
            fmt6(r.nte),
        ];
        rec.extend(r.ntp.as_array().iter().map(|&p| fmt6(p)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<metrics writer>", e))
}

/// Reads a metric CSV back into rows. Values are taken as written; no field
/// is recomputed.
pub fn read_metrics_csv<T: Scalar, R: Read>(input: R) -> Result<Vec<MetricRow<T>>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected metric CSV header".into(),
        });
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec?;
        let bad = |m: String| Error::Parse { line, message: m };
        let num = |i: usize| -> Result<T> {
            rec[i]
                .parse::<f64>()
                .map(T::from_f64_lossy)
                .map_err(|e| bad(format!("column {}: {e}", i + 1)))
        };
        let opt_num = |i: usize| -> Result<Option<T>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let mut probs = [T::zero(); SemanticType::COUNT];
        for (j, p) in probs.iter_mut().enumerate() {
            *p = num(8 + j)?;
        }
        rows.push(MetricRow {
            instance_id: rec[0].to_string(),
            label: rec[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            lexical_type: rec[2].parse().map_err(|e: Error| bad(e.to_string()))?,
            contextual_type: if rec[3].is_empty() {
                None
            } else {
                Some(rec[3].parse().map_err(|e: Error| bad(e.to_string()))?)
            },
            ntmr_l: num(4)?,
            ntmr_c: opt_num(5)?,
            other_ratio: num(6)?,
            nte: num(7)?,
            ntp: TypeDistribution::from_array(probs),
        });
    }
    Ok(rows)
}
