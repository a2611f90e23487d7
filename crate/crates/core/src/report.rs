//! Aggregate views over metric tables: sentence-type means, the
//! type-by-type NTP heatmap, per-word matching ratios, neighbor-word
//! distributions and the type hierarchy induced from the heatmap.
//!
//! Every aggregate is an unweighted mean over per-instance rows.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;
use serde_json::{json, Value};

use crate::corpus::{Dataset, SemanticType, SentenceLabel};
use crate::error::{Error, Result};
use crate::knn::NeighborGraph;
use crate::metrics::MetricRow;
use crate::scalar::Scalar;

const N: usize = SemanticType::COUNT;

/// Tolerance on row sums of a matrix built from per-instance distributions.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Mean NTP rows indexed by lexical type (row) and neighbor type (column).
#[derive(Debug, Clone, PartialEq)]
pub struct TypeMatrix<T: Scalar> {
    rows: [[T; N]; N],
    present: [bool; N],
}

impl<T: Scalar> TypeMatrix<T> {
    /// All rows present; each must lie in `[0, 1]` and sum to one within
    /// [`ROW_SUM_TOLERANCE`].
    pub fn new(rows: [[T; N]; N]) -> Result<Self> {
        Self::with_rows(rows, [true; N], ROW_SUM_TOLERANCE)
    }

    /// Builds a matrix from integer percentages such as a published heatmap.
    /// Rounding to whole percent lets a row sum drift by up to half a point
    /// per cell, so rows are checked against `1 +- 0.05`.
    pub fn from_percentages(pct: [[u32; N]; N]) -> Result<Self> {
        let hundred = T::from_usize_lossy(100);
        let rows = pct.map(|r| r.map(|p| T::from_usize_lossy(p as usize) / hundred));
        Self::with_rows(rows, [true; N], 0.05)
    }

    /// General constructor; rows with `present[i] == false` must be zero and
    /// are skipped by the sum check.
    pub fn with_rows(rows: [[T; N]; N], present: [bool; N], tolerance: f64) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let t = SemanticType::ALL[i];
            if row.iter().any(|v| !(v.to_f64_lossless() >= 0.0 && v.to_f64_lossless() <= 1.0)) {
                return Err(Error::InvalidMatrix(format!("row {t} has values outside [0, 1]")));
            }
            if !present[i] {
                if row.iter().any(|v| !v.is_zero()) {
                    return Err(Error::InvalidMatrix(format!("absent row {t} is not zero")));
                }
                continue;
            }
            let s: f64 = row.iter().map(|v| v.to_f64_lossless()).sum();
            if (s - 1.0).abs() > tolerance {
                return Err(Error::InvalidMatrix(format!(
                    "row {t} sums to {s}, expected 1 +- {tolerance}"
                )));
            }
        }
        Ok(Self { rows, present })
    }

    pub fn get(&self, row: SemanticType, col: SemanticType) -> T {
        self.rows[row.index()][col.index()]
    }

    pub fn row(&self, t: SemanticType) -> Option<&[T; N]> {
        self.present[t.index()].then(|| &self.rows[t.index()])
    }

    pub fn rows(&self) -> &[[T; N]; N] {
        &self.rows
    }

    pub fn diagonal(&self) -> [T; N] {
        std::array::from_fn(|i| self.rows[i][i])
    }

    /// Types without any instance after filtering.
    pub fn absent_rows(&self) -> Vec<SemanticType> {
        SemanticType::ALL
            .iter()
            .copied()
            .filter(|t| !self.present[t.index()])
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|&p| p)
    }

    /// CSV with a `lexical_type` column and one column per neighbor type;
    /// absent rows have empty cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        let mut header = vec!["lexical_type".to_string()];
        header.extend(SemanticType::ALL.iter().map(|t| t.to_string()));
        w.write_record(&header)?;
        for t in SemanticType::ALL {
            let mut rec = vec![t.to_string()];
            if self.present[t.index()] {
                rec.extend(
                    self.rows[t.index()]
                        .iter()
                        .map(|v| format!("{:.6}", v.to_f64_lossless())),
                );
            } else {
                rec.extend(std::iter::repeat_n(String::new(), N));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<heatmap writer>", e))
    }

    /// Reads the format written by [`TypeMatrix::write_csv`]. When
    /// `percent` is set, cells are percentages and rows are checked with the
    /// tolerance of [`TypeMatrix::from_percentages`].
    pub fn read_csv<R: Read>(input: R, percent: bool) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let expected: Vec<String> = std::iter::once("lexical_type".to_string())
            .chain(SemanticType::ALL.iter().map(|t| t.to_string()))
            .collect();
        if header != expected {
            return Err(Error::Parse {
                line: 1,
                message: "heatmap header must list lexical_type then the ten types".into(),
            });
        }
        let mut rows = [[T::zero(); N]; N];
        let mut present = [false; N];
        let scale = if percent { 100.0 } else { 1.0 };
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let t: SemanticType = rec[0].parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.iter().skip(1).all(str::is_empty) {
                continue;
            }
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell.parse().map_err(|e| Error::Parse {
                    line,
                    message: format!("column {}: {e}", j + 2),
                })?;
                rows[t.index()][j] = T::from_f64_lossy(v / scale);
            }
            present[t.index()] = true;
        }
        let tol = if percent { 0.05 } else { 1e-5 };
        Self::with_rows(rows, present, tol)
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Default label filter for per-type and per-word views.
pub const DEFAULT_FILTER: [SentenceLabel; 1] = [SentenceLabel::Matching];

/// Row `t` is the mean NTP distribution over rows with lexical type `t`
/// whose label passes `filter`. Types without such rows are absent.
pub fn heatmap_by_lexical_type<T: Scalar>(
    rows: &[MetricRow<T>],
    filter: &[SentenceLabel],
) -> Result<TypeMatrix<T>> {
    if filter.is_empty() {
        return Err(Error::InvalidConfig("label filter is empty".into()));
    }
    let mut sums = [[0.0f64; N]; N];
    let mut counts = [0usize; N];
    for r in rows.iter().filter(|r| filter.contains(&r.label)) {
        let i = r.lexical_type.index();
        counts[i] += 1;
        for (s, p) in sums[i].iter_mut().zip(r.ntp.as_array()) {
            *s += p.to_f64_lossless();
        }
    }
    let mut out = [[T::zero(); N]; N];
    for i in 0..N {
        if counts[i] > 0 {
            for j in 0..N {
                out[i][j] = T::from_f64_lossy(sums[i][j] / counts[i] as f64);
            }
        }
    }
    // T = f32 cannot meet 1e-9; tolerance follows the scalar's precision
    let tol = ROW_SUM_TOLERANCE.max(T::epsilon().to_f64_lossless() * 16.0);
    TypeMatrix::with_rows(out, counts.map(|c| c > 0), tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceTypeRow {
    pub label: SentenceLabel,
    pub count: usize,
    pub ntmr_l: Option<f64>,
    /// Mean over rows where the contextual ratio is defined.
    pub ntmr_c: Option<f64>,
    pub other_ratio: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Mean matching ratios and other-ratio per sentence label, all four labels
/// in canonical order.
pub fn table_by_sentence_type<T: Scalar>(rows: &[MetricRow<T>]) -> Vec<SentenceTypeRow> {
    SentenceLabel::ALL
        .iter()
        .map(|&label| {
            let sel: Vec<&MetricRow<T>> = rows.iter().filter(|r| r.label == label).collect();
            SentenceTypeRow {
                label,
                count: sel.len(),
                ntmr_l: mean_of(sel.iter().map(|r| r.ntmr_l.to_f64_lossless())),
                ntmr_c: mean_of(sel.iter().filter_map(|r| r.ntmr_c).map(|v| v.to_f64_lossless())),
                other_ratio: mean_of(sel.iter().map(|r| r.other_ratio.to_f64_lossless())),
            }
        })
        .collect()
}

pub fn write_sentence_types_csv<W: Write>(table: &[SentenceTypeRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["label", "count", "ntmr_l", "ntmr_c", "other_ratio"])?;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in table {
        w.write_record([
            r.label.as_str(),
            &r.count.to_string(),
            &f(r.ntmr_l),
            &f(r.ntmr_c),
            &f(r.other_ratio),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sentence type writer>", e))
}

/// `value * 100` rounded half-up to `decimals` places. The product is first
/// snapped to 1e-6 so decimal ties like 0.80625 are not lost to binary
/// representation error.
pub fn percent_half_up(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = value * 100.0 * scale;
    let snapped = (scaled * 1e6).round() / 1e6;
    (snapped + 0.5).floor() / scale
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordRow {
    pub lexical_type: SemanticType,
    pub lemma: String,
    pub count: usize,
    pub mean_ntmr_l: f64,
}

impl WordRow {
    pub fn percentage(&self) -> f64 {
        percent_half_up(self.mean_ntmr_l, 2)
    }
}

/// Mean lexical matching ratio per lemma over rows passing `filter`, sorted
/// by lexical type then lemma.
pub fn per_word_ntmr<T: Scalar>(
    rows: &[MetricRow<T>],
    dataset: &Dataset,
    filter: &[SentenceLabel],
) -> Result<Vec<WordRow>> {
    let mut acc: BTreeMap<(SemanticType, &str), (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| filter.contains(&r.label)) {
        let rec = dataset
            .get(&r.instance_id)
            .ok_or_else(|| Error::UnknownId(r.instance_id.clone()))?;
        let e = acc.entry((r.lexical_type, rec.lemma.as_str())).or_default();
        e.0 += r.ntmr_l.to_f64_lossless();
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|((t, lemma), (s, n))| WordRow {
            lexical_type: t,
            lemma: lemma.to_string(),
            count: n,
            mean_ntmr_l: s / n as f64,
        })
        .collect())
}

pub fn write_per_word_csv<W: Write>(rows: &[WordRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["lexical_type", "lemma", "count", "ntmr_l_pct"])?;
    for r in rows {
        w.write_record([
            r.lexical_type.as_str(),
            &r.lemma,
            &r.count.to_string(),
            &format!("{:.2}", r.percentage()),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<per-word writer>", e))
}

/// Where the out-edges of one lemma's instances land.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborWordDistribution {
    pub lemma: String,
    pub edges: usize,
    /// Share of edges landing on each named peer lemma.
    pub peers: Vec<(String, f64)>,
    /// Share of the remaining edges by neighbor lexical type.
    pub types: [f64; N],
    /// Sum of `types` outside the caller's types of interest.
    pub other: f64,
}

impl NeighborWordDistribution {
    pub fn total(&self) -> f64 {
        self.peers.iter().map(|p| p.1).sum::<f64>() + self.types.iter().sum::<f64>()
    }

    pub fn type_share(&self, t: SemanticType) -> f64 {
        self.types[t.index()]
    }

    pub fn peer_share(&self, lemma: &str) -> Option<f64> {
        self.peers.iter().find(|p| p.0 == lemma).map(|p| p.1)
    }
}

/// Splits the out-edges of every instance of `lemma` between the named
/// `peers` and, for edges to any other lemma, the neighbor's lexical type.
/// `other` rolls up the types not listed in `types_of_interest`.
pub fn neighbor_word_distribution(
    graph: &NeighborGraph,
    dataset: &Dataset,
    lemma: &str,
    peers: &[&str],
    types_of_interest: &[SemanticType],
) -> Result<NeighborWordDistribution> {
    let ids = dataset
        .lemma_ids(lemma)
        .ok_or_else(|| Error::UnknownLemma(lemma.to_string()))?;
    let mut peer_counts = vec![0usize; peers.len()];
    let mut type_counts = [0usize; N];
    let mut edges = 0usize;
    for id in ids {
        let node = graph
            .node(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        for n in graph.neighbors(node) {
            let nid = graph.id(n.node);
            let rec = dataset
                .get(nid)
                .ok_or_else(|| Error::UnknownId(nid.to_string()))?;
            edges += 1;
            match peers.iter().position(|&p| p == rec.lemma) {
                Some(i) => peer_counts[i] += 1,
                None => type_counts[rec.lexical_type.index()] += 1,
            }
        }
    }
    let share = |c: usize| if edges == 0 { 0.0 } else { c as f64 / edges as f64 };
    let types = type_counts.map(share);
    let other = SemanticType::ALL
        .iter()
        .filter(|t| !types_of_interest.contains(t))
        .map(|t| types[t.index()])
        .sum();
    Ok(NeighborWordDistribution {
        lemma: lemma.to_string(),
        edges,
        peers: peers
            .iter()
            .zip(peer_counts)
            .map(|(p, c)| (p.to_string(), share(c)))
            .collect(),
        types,
        other,
    })
}

/// One agglomeration step. Node ids `0..n` are leaves; merge `i` creates
/// node `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge<T: Scalar> {
    pub left: usize,
    pub right: usize,
    /// Mean symmetrized affinity between the two merged clusters.
    pub similarity: T,
    /// `max affinity - similarity`.
    pub distance: T,
    pub size: usize,
}

/// Average-linkage agglomeration of a symmetric affinity matrix (diagonal
/// ignored). Distances are `max off-diagonal affinity - affinity`. Ties go to
/// the pair whose smallest leaf indices come first.
pub fn average_linkage<T: Scalar>(affinity: &[Vec<T>]) -> Vec<Merge<T>> {
    let n = affinity.len();
    if n < 2 {
        return Vec::new();
    }
    let max_aff = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| affinity[i][j])
        .fold(T::neg_infinity(), T::max);
    let dist = |i: usize, j: usize| max_aff - affinity[i][j];

    // (node id, leaves sorted ascending)
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    while clusters.len() > 1 {
        clusters.sort_by_key(|c| c.1[0]);
        let mut best: Option<(T, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let (la, lb) = (&clusters[a].1, &clusters[b].1);
                let total: T = la
                    .iter()
                    .flat_map(|&i| lb.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dist(i, j))
                    .sum();
                let d = total / T::from_usize_lossy(la.len() * lb.len());
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.expect("at least two clusters");
        let right = clusters.remove(b);
        let left = clusters.remove(a);
        let mut leaves = left.1;
        leaves.extend(right.1);
        leaves.sort_unstable();
        let id = n + merges.len();
        merges.push(Merge {
            left: left.0,
            right: right.0,
            similarity: max_aff - d,
            distance: d,
            size: leaves.len(),
        });
        clusters.push((id, leaves));
    }
    merges
}

/// Binary merge tree over the ten types.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram<T: Scalar> {
    merges: Vec<Merge<T>>,
}

impl<T: Scalar> Dendrogram<T> {
    pub fn merges(&self) -> &[Merge<T>] {
        &self.merges
    }

    fn leaves_of(&self, node: usize, out: &mut Vec<SemanticType>) {
        if node < N {
            out.push(SemanticType::ALL[node]);
        } else {
            let m = &self.merges[node - N];
            self.leaves_of(m.left, out);
            self.leaves_of(m.right, out);
        }
    }

    /// Leaf types under a node, canonical order.
    pub fn leaves(&self, node: usize) -> Vec<SemanticType> {
        let mut out = Vec::new();
        self.leaves_of(node, &mut out);
        out.sort();
        out
    }

    /// Types joined by the first merge.
    pub fn first_merge(&self) -> Vec<SemanticType> {
        self.leaves(N)
    }

    /// Flat clustering obtained by undoing the last `clusters - 1` merges.
    /// Clusters are sorted by their first type.
    pub fn cut(&self, clusters: usize) -> Vec<Vec<SemanticType>> {
        let clusters = clusters.clamp(1, N);
        let kept = N - clusters;
        let mut roots: Vec<usize> = (0..N).collect();
        for (i, m) in self.merges[..kept].iter().enumerate() {
            roots.retain(|&r| r != m.left && r != m.right);
            roots.push(N + i);
        }
        let mut out: Vec<Vec<SemanticType>> = roots.iter().map(|&r| self.leaves(r)).collect();
        out.sort();
        out
    }

    fn node_json(&self, node: usize) -> Value {
        if node < N {
            json!({ "type": SemanticType::ALL[node].as_str() })
        } else {
            let m = &self.merges[node - N];
            json!({
                "similarity": m.similarity.to_f64_lossless(),
                "distance": m.distance.to_f64_lossless(),
                "size": m.size,
                "children": [self.node_json(m.left), self.node_json(m.right)],
            })
        }
    }

    /// Nested merge tree with linkage values.
    pub fn to_json(&self) -> Value {
        json!({
            "linkage": "average",
            "affinity": "symmetrized_ntp",
            "merge_order": self.merges.iter().enumerate().map(|(i, m)| json!({
                "left": m.left,
                "right": m.right,
                "similarity": m.similarity.to_f64_lossless(),
                "members": self.leaves(N + i),
            })).collect::<Vec<_>>(),
            "root": self.node_json(2 * N - 2),
        })
    }
}

/// Symmetrizes the off-diagonal NTP affinities, `(M + M^T) / 2`, and runs
/// average linkage over them.
pub fn induce_hierarchy<T: Scalar>(matrix: &TypeMatrix<T>) -> Result<Dendrogram<T>> {
    if !matrix.is_complete() {
        return Err(Error::InvalidMatrix(format!(
            "rows absent for {:?}",
            matrix.absent_rows()
        )));
    }
    let two = T::from_usize_lossy(2);
    let m = matrix.rows();
    let sym: Vec<Vec<T>> = (0..N)
        .map(|i| {
            (0..N)
                .map(|j| if i == j { T::zero() } else { (m[i][j] + m[j][i]) / two })
                .collect()
        })
        .collect();
    Ok(Dendrogram {
        merges: average_linkage(&sym),
    })
}
