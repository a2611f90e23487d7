//! Semantic-type vocabulary, sentence labels and annotated datasets.
//!
//! Annotation files are JSON lines; see [`parse_dataset`] for the accepted
//! keys. Loading validates every record and builds lemma and type indexes.
//! A loaded [`Dataset`] is immutable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed set of semantic types under analysis.
///
/// Declaration order is the canonical order used for every dense vector and
/// matrix layout in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticType {
    Animal,
    Artifact,
    Activity,
    Food,
    Human,
    Info,
    Location,
    Mood,
    Process,
    State,
}

impl SemanticType {
    pub const COUNT: usize = 10;

    pub const ALL: [SemanticType; Self::COUNT] = [
        SemanticType::Animal,
        SemanticType::Artifact,
        SemanticType::Activity,
        SemanticType::Food,
        SemanticType::Human,
        SemanticType::Info,
        SemanticType::Location,
        SemanticType::Mood,
        SemanticType::Process,
        SemanticType::State,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticType::Animal => "animal",
            SemanticType::Artifact => "artifact",
            SemanticType::Activity => "activity",
            SemanticType::Food => "food",
            SemanticType::Human => "human",
            SemanticType::Info => "info",
            SemanticType::Location => "location",
            SemanticType::Mood => "mood",
            SemanticType::Process => "process",
            SemanticType::State => "state",
        }
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownType(s.to_string()))
    }
}

/// Relation between an instance's lexical type and the type its context
/// asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceLabel {
    Matching,
    Coercion,
    OtherMismatch,
    Unrestricted,
}

impl SentenceLabel {
    pub const ALL: [SentenceLabel; 4] = [
        SentenceLabel::Matching,
        SentenceLabel::Coercion,
        SentenceLabel::OtherMismatch,
        SentenceLabel::Unrestricted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentenceLabel::Matching => "matching",
            SentenceLabel::Coercion => "coercion",
            SentenceLabel::OtherMismatch => "other_mismatch",
            SentenceLabel::Unrestricted => "unrestricted",
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the label denotes a lexical/contextual type mismatch.
    pub fn is_mismatch(self) -> bool {
        matches!(self, SentenceLabel::Coercion | SentenceLabel::OtherMismatch)
    }
}

impl fmt::Display for SentenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentenceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// One annotated noun occurrence.
///
/// `contextual_type` is normalized on construction: matching records carry
/// `Some(lexical_type)`, unrestricted records carry `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRecord {
    pub instance_id: String,
    pub lemma: String,
    pub sentence: String,
    /// Character (not byte) offsets `[start, end)` into `sentence`.
    pub target_span: (usize, usize),
    pub lexical_type: SemanticType,
    pub label: SentenceLabel,
    pub contextual_type: Option<SemanticType>,
}

impl InstanceRecord {
    /// Validates and normalizes a record.
    pub fn new(
        instance_id: impl Into<String>,
        lemma: impl Into<String>,
        sentence: impl Into<String>,
        target_span: (usize, usize),
        lexical_type: SemanticType,
        label: SentenceLabel,
        contextual_type: Option<SemanticType>,
    ) -> Result<Self> {
        let instance_id = instance_id.into();
        let lemma = lemma.into();
        let sentence = sentence.into();
        let invalid = |message: String| Error::InvalidRecord {
            id: instance_id.clone(),
            message,
        };

        if instance_id.is_empty() {
            return Err(invalid("empty instance id".into()));
        }
        if lemma.is_empty() {
            return Err(invalid("empty lemma".into()));
        }

        let contextual_type = match (label, contextual_type) {
            (SentenceLabel::Matching, None) => Some(lexical_type),
            (SentenceLabel::Matching, Some(ct)) if ct == lexical_type => Some(ct),
            (SentenceLabel::Matching, Some(ct)) => {
                return Err(invalid(format!(
                    "label matching requires contextual type == lexical type, got ct={ct} lt={lexical_type}"
                )))
            }
            (SentenceLabel::Unrestricted, None) => None,
            (SentenceLabel::Unrestricted, Some(ct)) => {
                return Err(invalid(format!(
                    "label unrestricted must not carry a contextual type, got ct={ct}"
                )))
            }
            (l, None) => {
                return Err(invalid(format!("label {l} requires a contextual type")));
            }
            (l, Some(ct)) if ct == lexical_type => {
                return Err(invalid(format!(
                    "label {l} requires contextual type != lexical type, both are {ct}"
                )))
            }
            (_, Some(ct)) => Some(ct),
        };

        let (start, end) = target_span;
        let n_chars = sentence.chars().count();
        if start >= end || end > n_chars {
            return Err(invalid(format!(
                "span [{start}, {end}) is empty or out of bounds for a sentence of {n_chars} characters"
            )));
        }
        let surface: String = sentence.chars().skip(start).take(end - start).collect();
        if !loosely_matches(&surface, &lemma) {
            return Err(invalid(format!(
                "span text {surface:?} does not overlap lemma {lemma:?}"
            )));
        }

        Ok(Self {
            instance_id,
            lemma,
            sentence,
            target_span,
            lexical_type,
            label,
            contextual_type,
        })
    }

    /// The span text as it appears in the sentence.
    pub fn surface(&self) -> String {
        let (start, end) = self.target_span;
        self.sentence.chars().skip(start).take(end - start).collect()
    }

    /// Contextual type when it differs from the lexical type.
    pub fn mismatched_contextual_type(&self) -> Option<SemanticType> {
        self.contextual_type.filter(|&ct| ct != self.lexical_type)
    }
}

/// Inflected surface forms ("gulps" for "gulp", "mice" for "mouse") are
/// accepted: the lowercased span and lemma must share a non-empty prefix.
fn loosely_matches(surface: &str, lemma: &str) -> bool {
    let s = surface.to_lowercase();
    let l = lemma.to_lowercase();
    matches!((s.chars().next(), l.chars().next()), (Some(a), Some(b)) if a == b)
}

/// On-disk shape of one annotation line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    lemma: String,
    sentence: String,
    span: [usize; 2],
    lexical_type: String,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contextual_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<InstanceRecord>,
    by_id: HashMap<String, usize>,
    by_lemma: BTreeMap<String, Vec<usize>>,
    by_type: [Vec<usize>; SemanticType::COUNT],
}

impl Dataset {
    /// Builds a dataset, checking id uniqueness and that each lemma has a
    /// single lexical type.
    pub fn new(records: Vec<InstanceRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        let mut by_lemma: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_type: [Vec<usize>; SemanticType::COUNT] = Default::default();
        let mut lemma_type: HashMap<&str, SemanticType> = HashMap::new();

        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.instance_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.instance_id.clone()));
            }
            match lemma_type.get(r.lemma.as_str()) {
                Some(&t) if t != r.lexical_type => {
                    return Err(Error::ConflictingLemmaType {
                        lemma: r.lemma.clone(),
                        first: t.to_string(),
                        second: r.lexical_type.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    lemma_type.insert(&r.lemma, r.lexical_type);
                }
            }
            by_lemma.entry(r.lemma.clone()).or_default().push(i);
            by_type[r.lexical_type.index()].push(i);
        }

        Ok(Self {
            records,
            by_id,
            by_lemma,
            by_type,
        })
    }

    pub fn records(&self) -> &[InstanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&InstanceRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Ids of all records of `lemma`, in file order.
    pub fn lemma_ids(&self, lemma: &str) -> Option<Vec<&str>> {
        self.by_lemma.get(lemma).map(|ix| {
            ix.iter()
                .map(|&i| self.records[i].instance_id.as_str())
                .collect()
        })
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.by_lemma.keys().map(String::as_str)
    }

    pub fn lemma_type(&self, lemma: &str) -> Option<SemanticType> {
        self.by_lemma
            .get(lemma)
            .and_then(|ix| ix.first())
            .map(|&i| self.records[i].lexical_type)
    }

    pub fn type_ids(&self, t: SemanticType) -> Vec<&str> {
        self.by_type[t.index()]
            .iter()
            .map(|&i| self.records[i].instance_id.as_str())
            .collect()
    }

    /// Writes the dataset as annotation JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            let raw = RawRecord {
                id: r.instance_id.clone(),
                lemma: r.lemma.clone(),
                sentence: r.sentence.clone(),
                span: [r.target_span.0, r.target_span.1],
                lexical_type: r.lexical_type.to_string(),
                label: r.label.to_string(),
                contextual_type: r.mismatched_contextual_type().map(|t| t.to_string()),
            };
            serde_json::to_writer(&mut out, &raw)?;
            out.write_all(b"\n")
                .map_err(|e| Error::io("<annotation writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Parses annotation JSON lines from a reader. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let at_line = |e: Error| match e {
            Error::InvalidRecord { .. } => e,
            other => Error::Parse {
                line: line_no,
                message: other.to_string(),
            },
        };
        let lexical_type: SemanticType = raw.lexical_type.parse().map_err(at_line)?;
        let label: SentenceLabel = raw.label.parse().map_err(at_line)?;
        let contextual_type = raw
            .contextual_type
            .as_deref()
            .map(SemanticType::from_str)
            .transpose()
            .map_err(at_line)?;
        records.push(InstanceRecord::new(
            raw.id,
            raw.lemma,
            raw.sentence,
            (raw.span[0], raw.span[1]),
            lexical_type,
            label,
            contextual_type,
        )?);
    }
    Dataset::new(records)
}

/// Loads and validates an annotation file.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub by_label: BTreeMap<SentenceLabel, usize>,
    pub by_lexical_type: BTreeMap<SemanticType, usize>,
}

/// Record counts per label and per lexical type; every label and type is
/// present as a key, with zero counts included.
pub fn dataset_summary(d: &Dataset) -> DatasetSummary {
    let mut by_label: BTreeMap<_, _> = SentenceLabel::ALL.iter().map(|&l| (l, 0)).collect();
    let mut by_lexical_type: BTreeMap<_, _> =
        SemanticType::ALL.iter().map(|&t| (t, 0)).collect();
    for r in d.records() {
        *by_label.entry(r.label).or_default() += 1;
        *by_lexical_type.entry(r.lexical_type).or_default() += 1;
    }
    DatasetSummary {
        total: d.len(),
        by_label,
        by_lexical_type,
    }
}
