//! Mann-Whitney U tests and the sentence-type NTE comparison suite.

use std::fmt;
use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::SentenceLabel;
use crate::error::{Error, Result};
use crate::metrics::MetricTable;
use crate::scalar::Scalar;

/// Samples with at most this many pooled observations and no ties get an
/// exact p-value.
pub const EXACT_MAX_TOTAL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` is stochastically smaller than `b`.
    Less,
    Greater,
    TwoSided,
}

impl Alternative {
    pub fn as_str(self) -> &'static str {
        match self {
            Alternative::Less => "less",
            Alternative::Greater => "greater",
            Alternative::TwoSided => "two_sided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::NormalApprox => "normal_approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MwuResult {
    /// U statistic of the first sample: pairs `(x, y)` with `x > y`, ties
    /// counting one half.
    pub u_statistic: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
}

/// Midranks (1-based) of the pooled sample plus the tie term
/// `sum(t^3 - t)` over tie groups.
fn pooled_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    (ranks, tie_term)
}

/// Null frequencies of U for sample sizes `(m, n)`: entry `u` is the number
/// of the `C(m+n, m)` arrangements whose U equals `u`.
fn u_frequencies(m: usize, n: usize) -> Vec<u64> {
    // freq[i][j] for i <= m, j <= n, built by the recurrence
    // f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u)
    let mut prev: Vec<Vec<u64>> = (0..=n).map(|_| vec![1]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1]);
        for j in 1..=n {
            let mut f = vec![0u64; i * j + 1];
            for (u, &c) in prev[j].iter().enumerate() {
                f[u + j] += c;
            }
            for (u, &c) in cur[j - 1].iter().enumerate() {
                f[u] += c;
            }
            cur.push(f);
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Largest pooled size for which exact frequencies fit in `u64`.
pub const EXACT_LIMIT: usize = 64;

struct Ranked {
    n1: usize,
    n2: usize,
    u1: f64,
    tie_term: f64,
}

fn rank_samples<T: Scalar>(a: &[T], b: &[T]) -> Result<Ranked> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let pooled: Vec<f64> = a.iter().chain(b).map(|x| x.to_f64_lossless()).collect();
    if pooled.iter().any(|x| x.is_nan()) {
        return Err(Error::NanInSample);
    }
    let (ranks, tie_term) = pooled_ranks(&pooled);
    let n1 = a.len();
    let r1: f64 = ranks[..n1].iter().sum();
    let f1 = n1 as f64;
    Ok(Ranked {
        n1,
        n2: b.len(),
        u1: r1 - f1 * (f1 + 1.0) / 2.0,
        tie_term,
    })
}

fn exact_p(r: &Ranked, alternative: Alternative) -> f64 {
    let freq = u_frequencies(r.n1, r.n2);
    let total: u64 = freq.iter().sum();
    let u = r.u1 as usize;
    let lower: u64 = freq[..=u].iter().sum();
    let upper: u64 = freq[u..].iter().sum();
    let tail = |c: u64| c as f64 / total as f64;
    match alternative {
        Alternative::Less => tail(lower),
        Alternative::Greater => tail(upper),
        Alternative::TwoSided => (2.0 * tail(lower.min(upper))).min(1.0),
    }
}

fn normal_p(r: &Ranked, alternative: Alternative) -> f64 {
    let (f1, f2) = (r.n1 as f64, r.n2 as f64);
    let mn = f1 * f2;
    let n = f1 + f2;
    let mu = mn / 2.0;
    let var = mn / 12.0 * ((n + 1.0) - r.tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let phi = |z: f64| std_normal.cdf(z);
    match alternative {
        Alternative::Less => phi((r.u1 - mu + 0.5) / sd),
        Alternative::Greater => phi((mu - r.u1 + 0.5) / sd),
        Alternative::TwoSided => {
            let u = r.u1.max(mn - r.u1);
            (2.0 * phi((mu - u + 0.5) / sd)).min(1.0)
        }
    }
}

fn finish(r: &Ranked, p: f64, alternative: Alternative, method: Method) -> MwuResult {
    MwuResult {
        u_statistic: r.u1,
        p_value: clamp_p(p),
        alternative,
        method,
        n1: r.n1,
        n2: r.n2,
    }
}

/// Mann-Whitney U test of `a` against `b`.
///
/// Exact null distribution when the pooled size is at most
/// [`EXACT_MAX_TOTAL`] and there are no ties; otherwise the normal
/// approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn mann_whitney_u<T: Scalar>(a: &[T], b: &[T], alternative: Alternative) -> Result<MwuResult> {
    let r = rank_samples(a, b)?;
    let method = if r.n1 + r.n2 <= EXACT_MAX_TOTAL && r.tie_term == 0.0 {
        Method::Exact
    } else {
        Method::NormalApprox
    };
    mann_whitney_u_using(a, b, alternative, method)
}

/// As [`mann_whitney_u`] with the p-value method fixed by the caller.
/// `Exact` requires tie-free samples with at most [`EXACT_LIMIT`] pooled
/// observations.
pub fn mann_whitney_u_using<T: Scalar>(
    a: &[T],
    b: &[T],
    alternative: Alternative,
    method: Method,
) -> Result<MwuResult> {
    let r = rank_samples(a, b)?;
    let p = match method {
        Method::Exact => {
            if r.tie_term != 0.0 || r.n1 + r.n2 > EXACT_LIMIT {
                return Err(Error::InvalidConfig(format!(
                    "exact Mann-Whitney needs tie-free samples of at most {EXACT_LIMIT} values"
                )));
            }
            exact_p(&r, alternative)
        }
        Method::NormalApprox => normal_p(&r, alternative),
    };
    Ok(finish(&r, p, alternative, method))
}

/// Significance levels, strongest first.
pub const STAR_LEVELS: [(f64, &str); 3] = [(0.001, "***"), (0.01, "**"), (0.05, "*")];

pub fn stars(p: f64) -> Option<&'static str> {
    STAR_LEVELS.iter().find(|(t, _)| p < *t).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hypothesis {
    pub left: SentenceLabel,
    pub right: SentenceLabel,
    pub alternative: Alternative,
}

impl Hypothesis {
    pub const fn less(left: SentenceLabel, right: SentenceLabel) -> Self {
        Self {
            left,
            right,
            alternative: Alternative::Less,
        }
    }

    pub const fn differs(left: SentenceLabel, right: SentenceLabel) -> Self {
        Self {
            left,
            right,
            alternative: Alternative::TwoSided,
        }
    }

    pub fn name(&self) -> String {
        let op = match self.alternative {
            Alternative::Less => "<",
            Alternative::Greater => ">",
            Alternative::TwoSided => "!=",
        };
        format!("{}{op}{}", self.left, self.right)
    }
}

/// The four NTE hypotheses tested per graph.
pub const SENTENCE_TYPE_HYPOTHESES: [Hypothesis; 4] = [
    Hypothesis::less(SentenceLabel::Matching, SentenceLabel::Coercion),
    Hypothesis::less(SentenceLabel::Matching, SentenceLabel::Unrestricted),
    Hypothesis::less(SentenceLabel::Coercion, SentenceLabel::Unrestricted),
    Hypothesis::differs(SentenceLabel::Coercion, SentenceLabel::OtherMismatch),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confirmed(&'static str),
    NotConfirmed,
    /// One of the compared labels has no instances.
    Untestable,
}

impl Verdict {
    pub fn marker(&self) -> &'static str {
        match self {
            Verdict::Confirmed(s) => s,
            Verdict::NotConfirmed => "not-confirmed",
            Verdict::Untestable => "untestable",
        }
    }

    pub fn is_confirmed(&self) -> bool {
        matches!(self, Verdict::Confirmed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub graph: String,
    pub hypothesis: Hypothesis,
    pub result: Option<MwuResult>,
    pub verdict: Verdict,
}

fn short(label: SentenceLabel) -> &'static str {
    match label {
        SentenceLabel::Matching => "mat.",
        SentenceLabel::Coercion => "coer.",
        SentenceLabel::OtherMismatch => "other.",
        SentenceLabel::Unrestricted => "unres.",
    }
}

impl fmt::Display for HypothesisResult {
    /// Compact notation, e.g. `mat. <** coer.` or `coer. !< unres.`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, r) = (short(self.hypothesis.left), short(self.hypothesis.right));
        let op = match self.hypothesis.alternative {
            Alternative::Less => "<",
            Alternative::Greater => ">",
            Alternative::TwoSided => "!=",
        };
        match self.verdict {
            Verdict::Confirmed(s) => write!(f, "{l} {op}{s} {r}"),
            Verdict::NotConfirmed if self.hypothesis.alternative == Alternative::TwoSided => {
                write!(f, "{l} {op} {r} (n.s.)")
            }
            Verdict::NotConfirmed => write!(f, "{l} !{op} {r}"),
            Verdict::Untestable => write!(f, "{l} {op} {r} (untestable)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelMean {
    pub graph: String,
    pub label: SentenceLabel,
    pub mean_nte: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub means: Vec<LabelMean>,
    pub tests: Vec<HypothesisResult>,
}

impl ComparisonReport {
    pub fn test(&self, graph: &str, hypothesis: &Hypothesis) -> Option<&HypothesisResult> {
        self.tests
            .iter()
            .find(|t| t.graph == graph && t.hypothesis == *hypothesis)
    }

    pub fn mean(&self, graph: &str, label: SentenceLabel) -> Option<f64> {
        self.means
            .iter()
            .find(|m| m.graph == graph && m.label == label)
            .and_then(|m| m.mean_nte)
    }

    pub fn write_tests_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["graph", "hypothesis", "alternative", "u", "p", "method", "n1", "n2", "stars"])?;
        for t in &self.tests {
            let (u, p, method, n1, n2) = match &t.result {
                Some(r) => (
                    format!("{}", r.u_statistic),
                    format!("{:.6e}", r.p_value),
                    r.method.as_str().to_string(),
                    r.n1.to_string(),
                    r.n2.to_string(),
                ),
                None => Default::default(),
            };
            w.write_record([
                t.graph.as_str(),
                &t.hypothesis.name(),
                t.hypothesis.alternative.as_str(),
                &u,
                &p,
                &method,
                &n1,
                &n2,
                t.verdict.marker(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<comparison writer>", e))
    }

    pub fn write_means_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["graph", "label", "mean_nte", "count"])?;
        for m in &self.means {
            w.write_record([
                m.graph.as_str(),
                m.label.as_str(),
                &m.mean_nte.map(|x| format!("{x:.6}")).unwrap_or_default(),
                &m.count.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<means writer>", e))
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per-label NTE means and the four sentence-type hypotheses for each named
/// metric table.
pub fn compare_sentence_types<T: Scalar>(
    graphs: &[(&str, &MetricTable<T>)],
) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::default();
    for &(graph, table) in graphs {
        for label in SentenceLabel::ALL {
            let sample = table.nte_sample(label);
            report.means.push(LabelMean {
                graph: graph.to_string(),
                label,
                mean_nte: mean(&sample),
                count: sample.len(),
            });
        }
        for h in SENTENCE_TYPE_HYPOTHESES {
            let (a, b) = (table.nte_sample(h.left), table.nte_sample(h.right));
            let (result, verdict) = if a.is_empty() || b.is_empty() {
                (None, Verdict::Untestable)
            } else {
                let r = mann_whitney_u(&a, &b, h.alternative)?;
                let v = stars(r.p_value).map_or(Verdict::NotConfirmed, Verdict::Confirmed);
                (Some(r), v)
            };
            report.tests.push(HypothesisResult {
                graph: graph.to_string(),
                hypothesis: h,
                result,
                verdict,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks() {
        let (r, t) = pooled_ranks(&[1.0, 2.0, 2.0, 4.0, 5.0, 6.0, 7.0, 7.0, 9.0, 10.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0, 5.0, 6.0, 7.5, 7.5, 9.0, 10.0]);
        assert_eq!(t, 12.0);
    }

    #[test]
    fn frequencies_sum_to_binomial() {
        let f = u_frequencies(2, 2);
        assert_eq!(f, vec![1, 1, 2, 1, 1]);
        let f = u_frequencies(10, 10);
        assert_eq!(f.iter().sum::<u64>(), 184_756);
        assert_eq!(u_frequencies(3, 0), vec![1]);
    }

    #[test]
    fn one_sixth() {
        let r = mann_whitney_u(&[1.0f64, 2.0], &[3.0, 4.0], Alternative::Less).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_two_sided() {
        let a = [0.3f64, 0.7, 1.1, 1.2];
        let r = mann_whitney_u(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.u_statistic, 8.0);
    }

    #[test]
    fn all_values_tied() {
        let r = mann_whitney_u(&[0.0f64; 5], &[0.0; 7], Alternative::Less).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.u_statistic, 17.5);
    }

    #[test]
    fn empty_sample() {
        assert!(matches!(
            mann_whitney_u::<f64>(&[], &[1.0], Alternative::Less),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn complete_separation_exact_tail() {
        // only 1 of C(10, 5) = 252 arrangements has U = 0
        let x: Vec<f64> = (1..=5).map(f64::from).collect();
        let y: Vec<f64> = (6..=10).map(f64::from).collect();
        let r = mann_whitney_u(&x, &y, Alternative::Less).unwrap();
        assert!((r.p_value - 1.0 / 252.0).abs() < 1e-15);
        let r = mann_whitney_u(&x, &y, Alternative::TwoSided).unwrap();
        assert!((r.p_value - 2.0 / 252.0).abs() < 1e-15);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.0009), Some("***"));
        assert_eq!(stars(0.001), Some("**"));
        assert_eq!(stars(0.0099), Some("**"));
        assert_eq!(stars(0.04), Some("*"));
        assert_eq!(stars(0.05), None);
    }

    #[test]
    fn display_notation() {
        let h = HypothesisResult {
            graph: "G_s".into(),
            hypothesis: SENTENCE_TYPE_HYPOTHESES[0],
            result: None,
            verdict: Verdict::Confirmed("***"),
        };
        assert_eq!(h.to_string(), "mat. <*** coer.");
        let h = HypothesisResult {
            verdict: Verdict::NotConfirmed,
            hypothesis: SENTENCE_TYPE_HYPOTHESES[2],
            ..h
        };
        assert_eq!(h.to_string(), "coer. !< unres.");
    }
}
