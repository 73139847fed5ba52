//! Partitions, the hard clustering model and its description lengths.
//!
//! A hard clustering model assigns each row word to one row class and each column word
//! to one column class and factors the joint distribution as
//!
//! ```text
//! P(n, v) = P(C_n, C_v) * P(n | C_n) * P(v | C_v)
//! ```
//!
//! All logarithms are base 2, so every length is in bits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceTable;
use crate::error::{Error, Result};

/// A disjoint cover of `0..len` by non-empty classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    classes: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl Partition {
    /// Every element in its own class, class `i` holding element `i`.
    pub fn singletons(len: usize) -> Self {
        Partition {
            classes: (0..len).map(|i| vec![i]).collect(),
            membership: (0..len).collect(),
        }
    }

    /// One class holding everything. `len` must be positive.
    pub fn single_class(len: usize) -> Self {
        assert!(len > 0, "cannot build a class over an empty vocabulary");
        Partition {
            classes: vec![(0..len).collect()],
            membership: vec![0; len],
        }
    }

    /// Validates and builds a partition. Members are sorted within each class; class order
    /// is kept as given.
    pub fn from_classes(len: usize, classes: Vec<Vec<usize>>) -> Result<Self> {
        let mut membership = vec![usize::MAX; len];
        let mut classes = classes;
        for (c, class) in classes.iter_mut().enumerate() {
            if class.is_empty() {
                return Err(Error::InvalidPartition(format!("class {c} is empty")));
            }
            class.sort_unstable();
            for &x in class.iter() {
                if x >= len {
                    return Err(Error::InvalidPartition(format!("element {x} outside 0..{len}")));
                }
                if membership[x] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("element {x} appears in two classes")));
                }
                membership[x] = c;
            }
        }
        if let Some(x) = membership.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidPartition(format!("element {x} is not covered")));
        }
        Ok(Partition { classes, membership })
    }

    /// Builds a partition from per-element labels; classes are numbered by first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = HashMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut membership = Vec::with_capacity(labels.len());
        for (x, label) in labels.iter().enumerate() {
            let c = *remap.entry(label).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            classes[c].push(x);
            membership.push(c);
        }
        Partition { classes, membership }
    }

    /// Number of elements covered.
    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, x: usize) -> usize {
        self.membership[x]
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Class member lists sorted, then the classes sorted: equal for equal groupings.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut c = self.classes.clone();
        c.sort();
        c
    }

    /// True when both partitions group elements identically, ignoring class numbering.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.len() == other.len() && self.canonical() == other.canonical()
    }

    /// The partition obtained by merging classes `i` and `j` into position `min(i, j)` and
    /// moving the last class into the vacated slot, matching the working-matrix update
    /// of the clustering engine.
    pub fn merged(&self, i: usize, j: usize) -> Result<Partition> {
        let k = self.n_classes();
        if i == j || i >= k || j >= k {
            return Err(Error::InvalidPartition(format!("cannot merge classes {i} and {j} of {k}")));
        }
        let (lo, hi) = (i.min(j), i.max(j));
        let mut classes = self.classes.clone();
        let moved = classes.swap_remove(hi);
        classes[lo].extend(moved);
        Partition::from_classes(self.len(), classes)
    }
}

/// Which within-class distribution the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `P(x | C_x) = f(x) / f(C_x)`.
    #[default]
    Full,
    /// `P(x | C_x) = 1 / |C_x|`: every word in a class is equally likely.
    Uniform,
}

/// Free parameters of a full hard clustering model:
/// `(|T_n| |T_v| - 1) + (N - |T_n|) + (V - |T_v|)`.
pub fn free_parameter_count(row_classes: usize, col_classes: usize, n_rows: usize, n_cols: usize) -> u64 {
    let joint = (row_classes * col_classes).saturating_sub(1);
    (joint + (n_rows - row_classes) + (n_cols - col_classes)) as u64
}

/// `L(M) = (k / 2) log2 m`.
pub fn model_description_length(free_params: u64, sample_size: u64) -> f64 {
    assert!(sample_size >= 1, "sample size must be positive");
    free_params as f64 / 2.0 * (sample_size as f64).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptionLength {
    pub model_bits: f64,
    pub data_bits: f64,
    pub total_bits: f64,
    pub free_params: u64,
}

/// Hard clustering model over a fixed pair of vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct HardClusterModel {
    row_vocab: Vec<String>,
    col_vocab: Vec<String>,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
    row_partition: Partition,
    col_partition: Partition,
    /// Row-major `|T_n| x |T_v|`.
    class_joint: Vec<f64>,
    row_conditionals: Vec<f64>,
    col_conditionals: Vec<f64>,
    variant: Variant,
    /// Class-pair counts and sample size, present for estimated models.
    class_counts: Option<(Vec<u64>, u64)>,
}

impl HardClusterModel {
    /// Maximum likelihood estimate: `P(C_n, C_v) = f(C_n, C_v) / m`, and either
    /// `P(x | C_x) = f(x) / f(C_x)` or the uniform `1 / |C_x|`.
    pub fn mle_estimate(
        table: &CooccurrenceTable,
        row_partition: &Partition,
        col_partition: &Partition,
        variant: Variant,
    ) -> Result<Self> {
        if row_partition.len() != table.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "row partition covers {} words, table has {}",
                row_partition.len(),
                table.n_rows()
            )));
        }
        if col_partition.len() != table.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "column partition covers {} words, table has {}",
                col_partition.len(),
                table.n_cols()
            )));
        }
        let (kr, kc) = (row_partition.n_classes(), col_partition.n_classes());
        let mut counts = vec![0u64; kr * kc];
        for (i, j, f) in table.nonzero() {
            counts[row_partition.class_of(i) * kc + col_partition.class_of(j)] += f;
        }
        let m = table.total() as f64;
        let class_joint = counts.iter().map(|&f| f as f64 / m).collect();
        let row_conditionals = conditionals(row_partition, table.row_marginals(), variant);
        let col_conditionals = conditionals(col_partition, table.col_marginals(), variant);
        Ok(HardClusterModel {
            row_vocab: table.row_vocab().to_vec(),
            col_vocab: table.col_vocab().to_vec(),
            row_index: index_of(table.row_vocab()),
            col_index: index_of(table.col_vocab()),
            row_partition: row_partition.clone(),
            col_partition: col_partition.clone(),
            class_joint,
            row_conditionals,
            col_conditionals,
            variant,
            class_counts: Some((counts, table.total())),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn row_partition(&self) -> &Partition {
        &self.row_partition
    }

    pub fn col_partition(&self) -> &Partition {
        &self.col_partition
    }

    pub fn row_vocab(&self) -> &[String] {
        &self.row_vocab
    }

    pub fn col_vocab(&self) -> &[String] {
        &self.col_vocab
    }

    pub fn row_id(&self, word: &str) -> Option<usize> {
        self.row_index.get(word).copied()
    }

    pub fn col_id(&self, word: &str) -> Option<usize> {
        self.col_index.get(word).copied()
    }

    /// `P(C_n, C_v)` by class index.
    pub fn class_joint(&self, row_class: usize, col_class: usize) -> f64 {
        self.class_joint[row_class * self.col_partition.n_classes() + col_class]
    }

    pub fn row_conditional(&self, i: usize) -> f64 {
        self.row_conditionals[i]
    }

    pub fn col_conditional(&self, j: usize) -> f64 {
        self.col_conditionals[j]
    }

    /// `P(n, v) = P(Cn, Cv) P(n | Cn) P(v | Cv)` by word index.
    pub fn joint_by_index(&self, i: usize, j: usize) -> f64 {
        let (cn, cv) = (self.row_partition.class_of(i), self.col_partition.class_of(j));
        self.class_joint(cn, cv) * self.row_conditionals[i] * self.col_conditionals[j]
    }

    fn row_word(&self, word: &str) -> Result<usize> {
        self.row_id(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    fn col_word(&self, word: &str) -> Result<usize> {
        self.col_id(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn joint_probability(&self, row_word: &str, col_word: &str) -> Result<f64> {
        Ok(self.joint_by_index(self.row_word(row_word)?, self.col_word(col_word)?))
    }

    fn row_class_mass(&self, cn: usize) -> f64 {
        (0..self.col_partition.n_classes()).map(|cv| self.class_joint(cn, cv)).sum()
    }

    fn col_class_mass(&self, cv: usize) -> f64 {
        (0..self.row_partition.n_classes()).map(|cn| self.class_joint(cn, cv)).sum()
    }

    /// `P(n | v) = P(C_n | C_v) P(n | C_n)` by index.
    pub fn row_given_col_by_index(&self, i: usize, j: usize) -> Result<f64> {
        let cv = self.col_partition.class_of(j);
        let cn = self.row_partition.class_of(i);
        let (cell, mass) = match &self.class_counts {
            Some((counts, _)) => {
                let kc = self.col_partition.n_classes();
                let mass: u64 = (0..self.row_partition.n_classes()).map(|a| counts[a * kc + cv]).sum();
                (counts[cn * kc + cv] as f64, mass as f64)
            }
            None => (self.class_joint(cn, cv), self.col_class_mass(cv)),
        };
        if mass * self.col_conditionals[j] <= 0.0 {
            return Err(Error::UndefinedConditional(self.col_vocab[j].clone()));
        }
        Ok(cell / mass * self.row_conditionals[i])
    }

    /// `P(v | n) = P(C_v | C_n) P(v | C_v)` by index.
    pub fn col_given_row_by_index(&self, i: usize, j: usize) -> Result<f64> {
        let cn = self.row_partition.class_of(i);
        let cv = self.col_partition.class_of(j);
        let (cell, mass) = match &self.class_counts {
            Some((counts, _)) => {
                let kc = self.col_partition.n_classes();
                let mass: u64 = counts[cn * kc..(cn + 1) * kc].iter().sum();
                (counts[cn * kc + cv] as f64, mass as f64)
            }
            None => (self.class_joint(cn, cv), self.row_class_mass(cn)),
        };
        if mass * self.row_conditionals[i] <= 0.0 {
            return Err(Error::UndefinedConditional(self.row_vocab[i].clone()));
        }
        Ok(cell / mass * self.col_conditionals[j])
    }

    /// Probability of row word `n` given column word `v`.
    pub fn prob_row_given_col(&self, row_word: &str, col_word: &str) -> Result<f64> {
        let j = self.col_word(col_word)?;
        let i = self.row_word(row_word)?;
        self.row_given_col_by_index(i, j)
    }

    /// Probability of column word `v` given row word `n`.
    pub fn prob_col_given_row(&self, col_word: &str, row_word: &str) -> Result<f64> {
        let i = self.row_word(row_word)?;
        let j = self.col_word(col_word)?;
        self.col_given_row_by_index(i, j)
    }

    /// Free parameters of this model. The uniform variant has no free within-class
    /// parameters, so only the class joint counts.
    pub fn free_parameters(&self) -> u64 {
        let (kr, kc) = (self.row_partition.n_classes(), self.col_partition.n_classes());
        match self.variant {
            Variant::Full => free_parameter_count(kr, kc, self.row_vocab.len(), self.col_vocab.len()),
            Variant::Uniform => (kr * kc).saturating_sub(1) as u64,
        }
    }

    fn check_vocab(&self, table: &CooccurrenceTable) -> Result<()> {
        if self.row_vocab != table.row_vocab() || self.col_vocab != table.col_vocab() {
            return Err(Error::DimensionMismatch("model and table vocabularies differ".into()));
        }
        Ok(())
    }

    /// `L(S|M) = -sum f(n,v) log2 P(n,v)` over observed pairs.
    pub fn data_description_length(&self, table: &CooccurrenceTable) -> Result<f64> {
        self.check_vocab(table)?;
        let mut bits = 0.0;
        for (i, j, f) in table.nonzero() {
            let p = self.joint_by_index(i, j);
            if p <= 0.0 {
                return Err(Error::InfiniteDescriptionLength {
                    row: self.row_vocab[i].clone(),
                    col: self.col_vocab[j].clone(),
                });
            }
            bits -= f as f64 * p.log2();
        }
        Ok(bits.max(0.0))
    }

    pub fn total_description_length(&self, table: &CooccurrenceTable) -> Result<DescriptionLength> {
        let data_bits = self.data_description_length(table)?;
        let free_params = self.free_parameters();
        let model_bits = model_description_length(free_params, table.total());
        Ok(DescriptionLength {
            model_bits,
            data_bits,
            total_bits: model_bits + data_bits,
            free_params,
        })
    }

    pub fn to_document(&self, lengths: Option<DescriptionLength>) -> ModelDocument {
        let kc = self.col_partition.n_classes();
        ModelDocument {
            variant: self.variant,
            row_vocab: self.row_vocab.clone(),
            col_vocab: self.col_vocab.clone(),
            row_classes: self.row_partition.classes().to_vec(),
            col_classes: self.col_partition.classes().to_vec(),
            class_joint: self.class_joint.chunks(kc.max(1)).map(<[f64]>::to_vec).collect(),
            row_conditionals: self.row_conditionals.clone(),
            col_conditionals: self.col_conditionals.clone(),
            sample_size: self.class_counts.as_ref().map(|c| c.1),
            class_counts: self
                .class_counts
                .as_ref()
                .map(|(c, _)| c.chunks(kc.max(1)).map(<[u64]>::to_vec).collect()),
            description_length: lengths,
        }
    }

    pub fn to_json(&self, lengths: Option<DescriptionLength>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(lengths))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    /// Rebuilds a model, checking shapes and normalization (to 1e-9).
    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        let row_partition = Partition::from_classes(doc.row_vocab.len(), doc.row_classes)?;
        let col_partition = Partition::from_classes(doc.col_vocab.len(), doc.col_classes)?;
        let (kr, kc) = (row_partition.n_classes(), col_partition.n_classes());
        if doc.class_joint.len() != kr || doc.class_joint.iter().any(|r| r.len() != kc) {
            return Err(Error::InvalidModel(format!("class_joint must be {kr} x {kc}")));
        }
        if doc.row_conditionals.len() != doc.row_vocab.len() || doc.col_conditionals.len() != doc.col_vocab.len() {
            return Err(Error::InvalidModel("conditional vectors do not match vocabularies".into()));
        }
        let class_joint: Vec<f64> = doc.class_joint.into_iter().flatten().collect();
        let in_unit = |p: &f64| (0.0..=1.0).contains(p);
        if !class_joint.iter().all(in_unit)
            || !doc.row_conditionals.iter().all(in_unit)
            || !doc.col_conditionals.iter().all(in_unit)
        {
            return Err(Error::InvalidModel("probabilities must lie in [0, 1]".into()));
        }
        if (class_joint.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel("class_joint does not sum to 1".into()));
        }
        for (part, cond, side) in [
            (&row_partition, &doc.row_conditionals, "row"),
            (&col_partition, &doc.col_conditionals, "column"),
        ] {
            for (c, class) in part.classes().iter().enumerate() {
                let s: f64 = class.iter().map(|&x| cond[x]).sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!("{side} class {c} conditionals sum to {s}")));
                }
            }
        }
        let class_counts = match (doc.class_counts, doc.sample_size) {
            (Some(rows), Some(m)) => {
                if rows.len() != kr || rows.iter().any(|r| r.len() != kc) {
                    return Err(Error::InvalidModel(format!("class_counts must be {kr} x {kc}")));
                }
                Some((rows.into_iter().flatten().collect(), m))
            }
            _ => None,
        };
        let mut row_index = HashMap::new();
        for (i, w) in doc.row_vocab.iter().enumerate() {
            if row_index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate row word `{w}`")));
            }
        }
        let mut col_index = HashMap::new();
        for (j, w) in doc.col_vocab.iter().enumerate() {
            if col_index.insert(w.clone(), j).is_some() {
                return Err(Error::InvalidModel(format!("duplicate column word `{w}`")));
            }
        }
        Ok(HardClusterModel {
            row_vocab: doc.row_vocab,
            col_vocab: doc.col_vocab,
            row_index,
            col_index,
            row_partition,
            col_partition,
            class_joint,
            row_conditionals: doc.row_conditionals,
            col_conditionals: doc.col_conditionals,
            variant: doc.variant,
            class_counts,
        })
    }
}

/// Serialized form of a [`HardClusterModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub variant: Variant,
    pub row_vocab: Vec<String>,
    pub col_vocab: Vec<String>,
    pub row_classes: Vec<Vec<usize>>,
    pub col_classes: Vec<Vec<usize>>,
    pub class_joint: Vec<Vec<f64>>,
    pub row_conditionals: Vec<f64>,
    pub col_conditionals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_counts: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description_length: Option<DescriptionLength>,
}

fn conditionals(partition: &Partition, marginals: &[u64], variant: Variant) -> Vec<f64> {
    let mut out = vec![0.0; partition.len()];
    for class in partition.classes() {
        match variant {
            Variant::Full => {
                let fc: u64 = class.iter().map(|&x| marginals[x]).sum();
                for &x in class {
                    out[x] = marginals[x] as f64 / fc as f64;
                }
            }
            Variant::Uniform => {
                let p = 1.0 / class.len() as f64;
                for &x in class {
                    out[x] = p;
                }
            }
        }
    }
    out
}

fn index_of(vocab: &[String]) -> HashMap<String, usize> {
    vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}
