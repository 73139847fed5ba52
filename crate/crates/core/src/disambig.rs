//! Structural disambiguation by comparing conditional probabilities, with back-off.
//!
//! A pp-attachment case `(verb, noun1, prep, noun2)` compares `P_prep(noun2 | verb)`
//! with `P_prep(noun2 | noun1)`; a compound triple `(noun1, noun2, noun3)` compares
//! `P(noun1 | noun2)` with `P(noun1 | noun3)`. Levels of an [`EstimatorChain`] are tried
//! in order until one gives two different probabilities; a default rule closes the chain.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use crate::cluster2d::{brown_cluster, cluster_2d, ClusterConfig};
use crate::cooccur::{split_record, CooccurrenceTable, Triple, TripleDataset};
use crate::error::{Error, Result};
use crate::hardmodel::{HardClusterModel, Partition, Variant};

/// Relation name under which compound-noun pairs are stored.
pub const COMPOUND_RELATION: &str = "compound";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseKind {
    Pp,
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    /// pp: attach to the verb. compound: attach noun1 to noun2 (left bracketing).
    AttachFirst,
    /// pp: attach to noun1. compound: attach noun1 to noun3 (right bracketing).
    AttachSecond,
    NoDecision,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::AttachFirst => "attach_first",
            Outcome::AttachSecond => "attach_second",
            Outcome::NoDecision => "no_decision",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CasePattern {
    Pp {
        verb: String,
        noun1: String,
        preposition: String,
        noun2: String,
    },
    Compound {
        noun1: String,
        noun2: String,
        noun3: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttachmentCase {
    pub pattern: CasePattern,
    pub gold: Option<Outcome>,
}

impl AttachmentCase {
    pub fn pp(verb: &str, noun1: &str, preposition: &str, noun2: &str) -> Self {
        AttachmentCase {
            pattern: CasePattern::Pp {
                verb: verb.into(),
                noun1: noun1.into(),
                preposition: preposition.into(),
                noun2: noun2.into(),
            },
            gold: None,
        }
    }

    pub fn compound(noun1: &str, noun2: &str, noun3: &str) -> Self {
        AttachmentCase {
            pattern: CasePattern::Compound {
                noun1: noun1.into(),
                noun2: noun2.into(),
                noun3: noun3.into(),
            },
            gold: None,
        }
    }

    pub fn with_gold(mut self, gold: Outcome) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn kind(&self) -> CaseKind {
        match self.pattern {
            CasePattern::Pp { .. } => CaseKind::Pp,
            CasePattern::Compound { .. } => CaseKind::Compound,
        }
    }

    pub fn relation(&self) -> &str {
        match &self.pattern {
            CasePattern::Pp { preposition, .. } => preposition,
            CasePattern::Compound { .. } => COMPOUND_RELATION,
        }
    }

    /// The word whose attachment is in question.
    pub fn dependent(&self) -> &str {
        match &self.pattern {
            CasePattern::Pp { noun2, .. } => noun2,
            CasePattern::Compound { noun1, .. } => noun1,
        }
    }

    /// The two candidate attachment sites, in outcome order.
    pub fn sites(&self) -> (&str, &str) {
        match &self.pattern {
            CasePattern::Pp { verb, noun1, .. } => (verb, noun1),
            CasePattern::Compound { noun2, noun3, .. } => (noun2, noun3),
        }
    }

    /// The training triple implied by the gold label, if any.
    pub fn gold_triple(&self) -> Option<Triple> {
        let head = match self.gold? {
            Outcome::AttachFirst => self.sites().0,
            Outcome::AttachSecond => self.sites().1,
            Outcome::NoDecision => return None,
        };
        Some(Triple {
            head: head.to_string(),
            relation: self.relation().to_string(),
            dependent: self.dependent().to_string(),
            count: 1,
        })
    }

    fn words(&self) -> Vec<&str> {
        match &self.pattern {
            CasePattern::Pp { verb, noun1, preposition, noun2 } => vec![verb, noun1, preposition, noun2],
            CasePattern::Compound { noun1, noun2, noun3 } => vec![noun1, noun2, noun3],
        }
    }

    /// Tab-separated input columns, gold letter last.
    pub fn to_tsv_fields(&self) -> String {
        let mut fields = self.words().join("\t");
        fields.push('\t');
        fields.push_str(gold_letter(self.kind(), self.gold));
        fields
    }
}

fn gold_letter(kind: CaseKind, gold: Option<Outcome>) -> &'static str {
    match (kind, gold) {
        (CaseKind::Pp, Some(Outcome::AttachFirst)) => "V",
        (CaseKind::Pp, Some(Outcome::AttachSecond)) => "N",
        (CaseKind::Compound, Some(Outcome::AttachFirst)) => "L",
        (CaseKind::Compound, Some(Outcome::AttachSecond)) => "R",
        _ => "-",
    }
}

fn parse_gold(kind: CaseKind, field: &str, line: usize) -> Result<Option<Outcome>> {
    Ok(match (kind, field.trim()) {
        (_, "-") | (_, "") => None,
        (CaseKind::Pp, "V") => Some(Outcome::AttachFirst),
        (CaseKind::Pp, "N") => Some(Outcome::AttachSecond),
        (CaseKind::Compound, "L") => Some(Outcome::AttachFirst),
        (CaseKind::Compound, "R") => Some(Outcome::AttachSecond),
        (_, other) => {
            return Err(Error::Ingest {
                line,
                reason: format!("unknown gold label `{other}`"),
            })
        }
    })
}

/// Reads a case file: pp `verb noun1 prep noun2 [gold]`, compound `noun1 noun2 noun3 [gold]`.
pub fn read_cases_tsv<R: BufRead>(reader: R, kind: CaseKind) -> Result<Vec<AttachmentCase>> {
    let arity = match kind {
        CaseKind::Pp => 4,
        CaseKind::Compound => 3,
    };
    let mut cases = Vec::new();
    for (pos, line) in reader.lines().enumerate() {
        let line_no = pos + 1;
        let line = line?;
        let Some(fields) = split_record(&line) else { continue };
        if fields.len() != arity && fields.len() != arity + 1 {
            return Err(Error::Ingest {
                line: line_no,
                reason: format!("expected {} or {} tab-separated fields, found {}", arity, arity + 1, fields.len()),
            });
        }
        if let Some(i) = fields[..arity].iter().position(|w| w.is_empty()) {
            return Err(Error::Ingest {
                line: line_no,
                reason: format!("field {} is empty", i + 1),
            });
        }
        let gold = match fields.get(arity) {
            Some(f) => parse_gold(kind, f, line_no)?,
            None => None,
        };
        let case = match kind {
            CaseKind::Pp => AttachmentCase::pp(fields[0], fields[1], fields[2], fields[3]),
            CaseKind::Compound => AttachmentCase::compound(fields[0], fields[1], fields[2]),
        };
        cases.push(AttachmentCase { gold, ..case });
    }
    Ok(cases)
}

/// Training triples implied by the gold labels of `cases`.
pub fn training_triples(cases: &[AttachmentCase]) -> TripleDataset {
    let mut ds = TripleDataset::default();
    for t in cases.iter().filter_map(AttachmentCase::gold_triple) {
        ds.push(t);
    }
    ds
}

/// Source of `P(dependent | head)` per relation.
pub trait ConditionalEstimator: Send + Sync {
    fn name(&self) -> &str;

    /// Whether this level has anything for `relation`; uncovered relations skip the level.
    fn covers(&self, relation: &str) -> bool;

    /// `P(dependent | head)`. Words the estimator has never seen give 0.
    fn estimate(&self, relation: &str, dependent: &str, head: &str) -> Result<f64>;
}

/// `P(dependent | head)` from one estimator.
pub fn estimate_pair(estimator: &dyn ConditionalEstimator, relation: &str, dependent: &str, head: &str) -> Result<f64> {
    estimator.estimate(relation, dependent, head)
}

/// Per-relation hard clustering models over head x dependent tables.
#[derive(Debug, Clone, Default)]
pub struct ClusterEstimator {
    name: String,
    models: BTreeMap<String, HardClusterModel>,
}

impl ClusterEstimator {
    pub fn new(name: impl Into<String>) -> Self {
        ClusterEstimator {
            name: name.into(),
            models: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, relation: impl Into<String>, model: HardClusterModel) {
        self.models.insert(relation.into(), model);
    }

    pub fn models(&self) -> &BTreeMap<String, HardClusterModel> {
        &self.models
    }
}

impl ConditionalEstimator for ClusterEstimator {
    fn name(&self) -> &str {
        &self.name
    }

    fn covers(&self, relation: &str) -> bool {
        self.models.contains_key(relation)
    }

    fn estimate(&self, relation: &str, dependent: &str, head: &str) -> Result<f64> {
        let model = self
            .models
            .get(relation)
            .ok_or_else(|| Error::UntrainedRelation(relation.to_string()))?;
        match (model.row_id(head), model.col_id(dependent)) {
            (Some(i), Some(j)) => model.col_given_row_by_index(i, j),
            _ => Ok(0.0),
        }
    }
}

/// Relative frequencies `f(head, dependent) / f(head)` straight from the counts.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalEstimator {
    tables: BTreeMap<String, CooccurrenceTable>,
}

impl EmpiricalEstimator {
    pub fn from_triples(triples: &TripleDataset) -> Self {
        let tables = triples
            .relations_by_frequency()
            .into_iter()
            .filter_map(|(rel, _)| triples.to_table(&rel).map(|t| (rel, t)))
            .collect();
        EmpiricalEstimator { tables }
    }
}

impl ConditionalEstimator for EmpiricalEstimator {
    fn name(&self) -> &str {
        "word-based"
    }

    fn covers(&self, relation: &str) -> bool {
        self.tables.contains_key(relation)
    }

    fn estimate(&self, relation: &str, dependent: &str, head: &str) -> Result<f64> {
        let table = self
            .tables
            .get(relation)
            .ok_or_else(|| Error::UntrainedRelation(relation.to_string()))?;
        let Some(i) = table.row_id(head) else { return Ok(0.0) };
        let f = table.count_words(head, dependent);
        Ok(f as f64 / table.row_marginals()[i] as f64)
    }
}

/// Externally supplied probabilities, read from `relation head dependent probability`
/// lines. Stands in for thesaurus-based estimators built elsewhere.
#[derive(Debug, Clone, Default)]
pub struct TableEstimator {
    relations: HashSet<String>,
    probs: HashMap<(String, String, String), f64>,
}

impl TableEstimator {
    pub fn insert(&mut self, relation: &str, head: &str, dependent: &str, p: f64) {
        self.relations.insert(relation.to_string());
        self.probs
            .insert((relation.to_string(), head.to_string(), dependent.to_string()), p);
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut est = TableEstimator::default();
        for (pos, line) in reader.lines().enumerate() {
            let line_no = pos + 1;
            let line = line?;
            let Some(fields) = split_record(&line) else { continue };
            let [rel, head, dep, p] = fields.as_slice() else {
                return Err(Error::Ingest {
                    line: line_no,
                    reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            };
            let p: f64 = p.trim().parse().map_err(|_| Error::Ingest {
                line: line_no,
                reason: format!("probability `{p}` is not a number"),
            })?;
            if !(0.0..=1.0).contains(&p) || rel.is_empty() {
                return Err(Error::Ingest {
                    line: line_no,
                    reason: "probability must lie in [0, 1] and relation must be non-empty".into(),
                });
            }
            est.insert(rel, head, dep, p);
        }
        Ok(est)
    }
}

impl ConditionalEstimator for TableEstimator {
    fn name(&self) -> &str {
        "fallback"
    }

    fn covers(&self, relation: &str) -> bool {
        self.relations.contains(relation)
    }

    fn estimate(&self, relation: &str, dependent: &str, head: &str) -> Result<f64> {
        if !self.covers(relation) {
            return Err(Error::UntrainedRelation(relation.to_string()));
        }
        let key = (relation.to_string(), head.to_string(), dependent.to_string());
        Ok(self.probs.get(&key).copied().unwrap_or(0.0))
    }
}

/// Outcome used when no level can decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DefaultRule {
    pub pp: Outcome,
    pub compound: Outcome,
}

impl Default for DefaultRule {
    /// Low attachment for pp; noun1 attaches to its neighbour for compounds.
    fn default() -> Self {
        DefaultRule {
            pp: Outcome::AttachSecond,
            compound: Outcome::AttachFirst,
        }
    }
}

impl DefaultRule {
    pub fn outcome(&self, kind: CaseKind) -> Outcome {
        match kind {
            CaseKind::Pp => self.pp,
            CaseKind::Compound => self.compound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecidingLevel {
    /// 1-based index into the chain.
    Level(usize),
    Default,
    /// Nothing decided (chain without default rule).
    Undecided,
}

impl fmt::Display for DecidingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecidingLevel::Level(k) => write!(f, "{k}"),
            DecidingLevel::Default => f.write_str("default"),
            DecidingLevel::Undecided => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub outcome: Outcome,
    pub level: DecidingLevel,
    /// `(p_first, p_second)` at the deciding level; `None` for the default rule.
    pub probabilities: Option<(f64, f64)>,
}

impl Decision {
    pub fn decided_before_default(&self) -> bool {
        matches!(self.level, DecidingLevel::Level(_))
    }

    /// Tab-separated `outcome level p_first p_second`.
    pub fn to_tsv_fields(&self) -> String {
        let (p1, p2) = match self.probabilities {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => ("-".into(), "-".into()),
        };
        format!("{}\t{}\t{}\t{}", self.outcome.as_str(), self.level, p1, p2)
    }
}

/// Ordered estimator levels, closed by an optional default rule.
#[derive(Default)]
pub struct EstimatorChain {
    levels: Vec<Box<dyn ConditionalEstimator>>,
    default: Option<DefaultRule>,
}

impl EstimatorChain {
    /// A chain ending in `default`.
    pub fn new(default: DefaultRule) -> Self {
        EstimatorChain {
            levels: Vec::new(),
            default: Some(default),
        }
    }

    /// A chain that can answer `NoDecision`.
    pub fn without_default() -> Self {
        EstimatorChain::default()
    }

    pub fn push(&mut self, level: Box<dyn ConditionalEstimator>) {
        self.levels.push(level);
    }

    pub fn with_level(mut self, level: impl ConditionalEstimator + 'static) -> Self {
        self.levels.push(Box::new(level));
        self
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn has_default(&self) -> bool {
        self.default.is_some()
    }

    pub fn level_names(&self) -> Vec<&str> {
        self.levels.iter().map(|l| l.name()).collect()
    }

    /// Consults the levels in order. A level decides when its two probabilities differ;
    /// both zero, or a tie, passes the case on.
    pub fn decide(&self, case: &AttachmentCase) -> Result<Decision> {
        let relation = case.relation();
        let dependent = case.dependent();
        let (first, second) = case.sites();
        for (k, level) in self.levels.iter().enumerate() {
            if !level.covers(relation) {
                continue;
            }
            let p_first = level.estimate(relation, dependent, first)?;
            let p_second = level.estimate(relation, dependent, second)?;
            let outcome = if p_first > p_second {
                Outcome::AttachFirst
            } else if p_second > p_first {
                Outcome::AttachSecond
            } else {
                continue;
            };
            return Ok(Decision {
                outcome,
                level: DecidingLevel::Level(k + 1),
                probabilities: Some((p_first, p_second)),
            });
        }
        Ok(match self.default {
            Some(rule) => Decision {
                outcome: rule.outcome(case.kind()),
                level: DecidingLevel::Default,
                probabilities: None,
            },
            None => Decision {
                outcome: Outcome::NoDecision,
                level: DecidingLevel::Undecided,
                probabilities: None,
            },
        })
    }
}

/// How per-relation models are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMethod {
    /// MDL co-clustering.
    Mdl(ClusterConfig),
    /// Fixed class counts `(heads, dependents)`, no threshold.
    Brown { rows: usize, cols: usize, config: ClusterConfig },
    /// No clustering: singleton partitions, i.e. the empirical distribution.
    Singleton,
}

/// Trains one model per relation for the `top_k` most frequent relations; rarer relations
/// are left uncovered so the chain falls through to its next level.
///
/// Rows of each table are heads (verbs and nouns share one vocabulary), columns are
/// dependents.
pub fn train_pp_estimators(
    triples: &TripleDataset,
    top_k: usize,
    method: ClusterMethod,
    name: &str,
) -> ClusterEstimator {
    let mut est = ClusterEstimator::new(name);
    for (relation, _) in triples.relations_by_frequency().into_iter().take(top_k) {
        let Some(table) = triples.to_table(&relation) else { continue };
        let model = match method {
            ClusterMethod::Mdl(config) => cluster_2d(&table, config).model,
            ClusterMethod::Brown { rows, cols, config } => brown_cluster(&table, rows, cols, config).model,
            ClusterMethod::Singleton => HardClusterModel::mle_estimate(
                &table,
                &Partition::singletons(table.n_rows()),
                &Partition::singletons(table.n_cols()),
                Variant::Full,
            )
            .expect("singleton partitions match their table"),
        };
        log::info!(
            "relation `{relation}`: {} x {} words -> {} x {} classes",
            table.n_rows(),
            table.n_cols(),
            model.row_partition().n_classes(),
            model.col_partition().n_classes()
        );
        est.insert(relation, model);
    }
    est
}
