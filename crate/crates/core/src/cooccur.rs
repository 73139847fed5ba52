//! Co-occurrence counts over two vocabularies.
//!
//! Rows are the "noun" side and columns the "verb" side, but nothing here depends on
//! that reading: any bipartite count data works. Counts are exact integers.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// An `N x V` matrix of pair frequencies with its vocabularies and marginals.
///
/// Immutable once built. Every row and column has a positive marginal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    row_vocab: Vec<String>,
    col_vocab: Vec<String>,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
    counts: Vec<u64>,
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    total: u64,
}

/// Accumulates records in first-seen vocabulary order, summing duplicates.
#[derive(Default)]
struct PairAccumulator {
    row_vocab: Vec<String>,
    col_vocab: Vec<String>,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
    cells: HashMap<(usize, usize), u64>,
}

impl PairAccumulator {
    fn add(&mut self, row: &str, col: &str, count: u64) {
        let r = intern(&mut self.row_vocab, &mut self.row_index, row);
        let c = intern(&mut self.col_vocab, &mut self.col_index, col);
        *self.cells.entry((r, c)).or_insert(0) += count;
    }

    fn finish(self) -> CooccurrenceTable {
        let n = self.row_vocab.len();
        let v = self.col_vocab.len();
        let mut counts = vec![0u64; n * v];
        for ((r, c), f) in self.cells {
            counts[r * v + c] = f;
        }
        CooccurrenceTable::assemble(self.row_vocab, self.col_vocab, self.row_index, self.col_index, counts)
    }
}

fn intern(vocab: &mut Vec<String>, index: &mut HashMap<String, usize>, word: &str) -> usize {
    if let Some(&i) = index.get(word) {
        return i;
    }
    let i = vocab.len();
    vocab.push(word.to_string());
    index.insert(word.to_string(), i);
    i
}

fn check_count(line: usize, count: i64) -> Result<u64> {
    if count <= 0 {
        return Err(Error::Ingest {
            line,
            reason: format!("count must be a positive integer, got {count}"),
        });
    }
    Ok(count as u64)
}

fn check_word(line: usize, field: &str, word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::Ingest {
            line,
            reason: format!("empty {field} field"),
        });
    }
    Ok(())
}

impl CooccurrenceTable {
    /// Builds a table from `(row, column, count)` records.
    ///
    /// Duplicate pairs are summed and vocabularies keep first-seen order. Errors name the
    /// 1-based position of the offending record.
    pub fn ingest_pairs<I, R, C>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (R, C, i64)>,
        R: AsRef<str>,
        C: AsRef<str>,
    {
        let mut acc = PairAccumulator::default();
        for (pos, (row, col, count)) in records.into_iter().enumerate() {
            let line = pos + 1;
            let (row, col) = (row.as_ref(), col.as_ref());
            check_word(line, "row", row)?;
            check_word(line, "column", col)?;
            acc.add(row, col, check_count(line, count)?);
        }
        Ok(acc.finish())
    }

    /// Reads the pair TSV format: `row<TAB>col[<TAB>count]`, `#` comments, blank lines ignored.
    pub fn read_pairs_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut acc = PairAccumulator::default();
        for (pos, line) in reader.lines().enumerate() {
            let line_no = pos + 1;
            let line = line?;
            let Some(fields) = split_record(&line) else { continue };
            let (row, col, count) = match fields.as_slice() {
                [r, c] => (*r, *c, 1),
                [r, c, f] => (*r, *c, parse_count(line_no, f)?),
                _ => {
                    return Err(Error::Ingest {
                        line: line_no,
                        reason: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                    })
                }
            };
            check_word(line_no, "row", row)?;
            check_word(line_no, "column", col)?;
            acc.add(row, col, check_count(line_no, count)?);
        }
        Ok(acc.finish())
    }

    /// Builds a table from an explicit row-major matrix.
    ///
    /// Rejects duplicate vocabulary entries, ragged rows, and all-zero rows or columns
    /// (a class with zero frequency has no defined within-class distribution).
    pub fn from_matrix(row_vocab: Vec<String>, col_vocab: Vec<String>, matrix: Vec<Vec<u64>>) -> Result<Self> {
        let n = row_vocab.len();
        let v = col_vocab.len();
        if matrix.len() != n {
            return Err(Error::DimensionMismatch(format!("{} matrix rows for {} row words", matrix.len(), n)));
        }
        let mut row_index = HashMap::with_capacity(n);
        for (i, w) in row_vocab.iter().enumerate() {
            if row_index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidTable(format!("duplicate row word `{w}`")));
            }
        }
        let mut col_index = HashMap::with_capacity(v);
        for (j, w) in col_vocab.iter().enumerate() {
            if col_index.insert(w.clone(), j).is_some() {
                return Err(Error::InvalidTable(format!("duplicate column word `{w}`")));
            }
        }
        let mut counts = Vec::with_capacity(n * v);
        for (i, row) in matrix.into_iter().enumerate() {
            if row.len() != v {
                return Err(Error::DimensionMismatch(format!("row {i} has {} cells, expected {v}", row.len())));
            }
            counts.extend(row);
        }
        let table = Self::assemble(row_vocab, col_vocab, row_index, col_index, counts);
        if let Some(i) = table.row_marginals.iter().position(|&f| f == 0) {
            return Err(Error::InvalidTable(format!("row word `{}` has zero frequency", table.row_vocab[i])));
        }
        if let Some(j) = table.col_marginals.iter().position(|&f| f == 0) {
            return Err(Error::InvalidTable(format!("column word `{}` has zero frequency", table.col_vocab[j])));
        }
        Ok(table)
    }

    fn assemble(
        row_vocab: Vec<String>,
        col_vocab: Vec<String>,
        row_index: HashMap<String, usize>,
        col_index: HashMap<String, usize>,
        counts: Vec<u64>,
    ) -> Self {
        let v = col_vocab.len();
        let mut row_marginals = vec![0u64; row_vocab.len()];
        let mut col_marginals = vec![0u64; v];
        for (idx, &f) in counts.iter().enumerate() {
            row_marginals[idx / v] += f;
            col_marginals[idx % v] += f;
        }
        let total = row_marginals.iter().sum();
        CooccurrenceTable {
            row_vocab,
            col_vocab,
            row_index,
            col_index,
            counts,
            row_marginals,
            col_marginals,
            total,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_vocab.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_vocab.len()
    }

    /// Total sample size `m`.
    pub fn total(&self) -> u64 {
        self.total
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

    /// `f(n_i, v_j)`. Panics on out-of-range indices.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        assert!(i < self.n_rows() && j < self.n_cols(), "cell ({i}, {j}) out of range");
        self.counts[i * self.n_cols() + j]
    }

    /// Frequency of a pair looked up by word; zero when either word is absent.
    pub fn count_words(&self, row: &str, col: &str) -> u64 {
        match (self.row_id(row), self.col_id(col)) {
            (Some(i), Some(j)) => self.count(i, j),
            _ => 0,
        }
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let v = self.n_cols();
        &self.counts[i * v..(i + 1) * v]
    }

    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[u64] {
        &self.col_marginals
    }

    /// Non-zero cells in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let v = self.n_cols();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > 0)
            .map(move |(idx, &f)| (idx / v, idx % v, f))
    }

    /// The same data with rows and columns swapped.
    pub fn transposed(&self) -> Self {
        let (n, v) = (self.n_rows(), self.n_cols());
        let mut counts = vec![0u64; n * v];
        for i in 0..n {
            for j in 0..v {
                counts[j * n + i] = self.counts[i * v + j];
            }
        }
        Self::assemble(
            self.col_vocab.clone(),
            self.row_vocab.clone(),
            self.col_index.clone(),
            self.row_index.clone(),
            counts,
        )
    }
}

/// Sum of `f(n, v)` over `n` in `rows` and `v` in `cols`.
///
/// Passing every column index yields the class marginal `f(C_n)`.
pub fn class_count(table: &CooccurrenceTable, rows: &[usize], cols: &[usize]) -> Result<u64> {
    for &i in rows {
        if i >= table.n_rows() {
            return Err(Error::IndexOutOfRange { index: i, len: table.n_rows() });
        }
    }
    for &j in cols {
        if j >= table.n_cols() {
            return Err(Error::IndexOutOfRange { index: j, len: table.n_cols() });
        }
    }
    Ok(rows
        .iter()
        .map(|&i| cols.iter().map(|&j| table.count(i, j)).sum::<u64>())
        .sum())
}

/// One `(head, relation, dependent)` observation with its frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub dependent: String,
    pub count: u64,
}

/// Triples grouped by relation (e.g. by preposition).
#[derive(Debug, Clone, Default)]
pub struct TripleDataset {
    records: Vec<Triple>,
    by_relation: HashMap<String, Vec<usize>>,
    relation_order: Vec<String>,
}

impl TripleDataset {
    pub fn ingest_triples<I, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S, i64)>,
        S: AsRef<str>,
    {
        let mut ds = TripleDataset::default();
        for (pos, (head, rel, dep, count)) in records.into_iter().enumerate() {
            ds.push_checked(pos + 1, head.as_ref(), rel.as_ref(), dep.as_ref(), count)?;
        }
        Ok(ds)
    }

    /// Reads `head<TAB>relation<TAB>dependent[<TAB>count]` lines.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut ds = TripleDataset::default();
        for (pos, line) in reader.lines().enumerate() {
            let line_no = pos + 1;
            let line = line?;
            let Some(fields) = split_record(&line) else { continue };
            let (h, r, d, count) = match fields.as_slice() {
                [h, r, d] => (*h, *r, *d, 1),
                [h, r, d, f] => (*h, *r, *d, parse_count(line_no, f)?),
                _ => {
                    return Err(Error::Ingest {
                        line: line_no,
                        reason: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
                    })
                }
            };
            ds.push_checked(line_no, h, r, d, count)?;
        }
        Ok(ds)
    }

    fn push_checked(&mut self, line: usize, head: &str, relation: &str, dependent: &str, count: i64) -> Result<()> {
        check_word(line, "head", head)?;
        check_word(line, "relation", relation)?;
        check_word(line, "dependent", dependent)?;
        let count = check_count(line, count)?;
        self.push(Triple {
            head: head.to_string(),
            relation: relation.to_string(),
            dependent: dependent.to_string(),
            count,
        });
        Ok(())
    }

    /// Appends a record that is already known to be valid.
    pub fn push(&mut self, triple: Triple) {
        debug_assert!(triple.count > 0 && !triple.relation.is_empty());
        let idx = self.records.len();
        match self.by_relation.get_mut(&triple.relation) {
            Some(list) => list.push(idx),
            None => {
                self.relation_order.push(triple.relation.clone());
                self.by_relation.insert(triple.relation.clone(), vec![idx]);
            }
        }
        self.records.push(triple);
    }

    pub fn extend(&mut self, other: &TripleDataset) {
        for t in &other.records {
            self.push(t.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Triple] {
        &self.records
    }

    pub fn records_for<'a>(&'a self, relation: &str) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_relation
            .get(relation)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    /// Total count of records carrying `relation`.
    pub fn relation_total(&self, relation: &str) -> u64 {
        self.records_for(relation).map(|t| t.count).sum()
    }

    /// Relations ordered by descending total count, ties broken by name.
    pub fn relations_by_frequency(&self) -> Vec<(String, u64)> {
        let mut out: Vec<(String, u64)> = self
            .relation_order
            .iter()
            .map(|r| (r.clone(), self.relation_total(r)))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Head x dependent table for one relation, or `None` if the relation never occurs.
    pub fn to_table(&self, relation: &str) -> Option<CooccurrenceTable> {
        let ids = self.by_relation.get(relation)?;
        let mut acc = PairAccumulator::default();
        for &i in ids {
            let t = &self.records[i];
            acc.add(&t.head, &t.dependent, t.count);
        }
        Some(acc.finish())
    }
}

/// Splits a TSV line into fields; `None` for blank and comment lines.
pub(crate) fn split_record(line: &str) -> Option<Vec<&str>> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() || line.starts_with('#') {
        return None;
    }
    Some(line.split('\t').collect())
}

fn parse_count(line: usize, field: &str) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| Error::Ingest {
        line,
        reason: format!("count `{field}` is not an integer"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn s1() -> CooccurrenceTable {
        CooccurrenceTable::ingest_pairs([("n1", "v1", 2), ("n2", "v2", 2), ("n3", "v1", 1), ("n3", "v2", 1)]).unwrap()
    }

    #[test]
    fn s1_shape_and_marginals() {
        let t = s1();
        assert_eq!((t.n_rows(), t.n_cols(), t.total()), (3, 2, 6));
        assert_eq!(t.row_marginals(), &[2, 2, 2]);
        assert_eq!(t.col_marginals(), &[3, 3]);
        assert_eq!(t.row_vocab(), &["n1", "n2", "n3"]);
        assert_eq!(t.count(0, 1), 0);
    }

    #[test]
    fn duplicates_are_summed() {
        let t = CooccurrenceTable::ingest_pairs([("a", "x", 1), ("a", "x", 2)]).unwrap();
        assert_eq!(t.count(0, 0), 3);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn non_positive_count_is_rejected() {
        let err = CooccurrenceTable::ingest_pairs([("a", "x", 1), ("a", "x", 0)]).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 2, .. }), "{err}");
        assert!(CooccurrenceTable::ingest_pairs([("a", "x", -3)]).is_err());
    }

    #[test]
    fn tsv_parsing() {
        let text = "# comment\nn1\tv1\t2\n\nn2\tv2\nn2\tv2\t1\n";
        let t = CooccurrenceTable::read_pairs_tsv(text.as_bytes()).unwrap();
        assert_eq!(t.total(), 4);
        assert_eq!(t.count_words("n2", "v2"), 2);

        let err = CooccurrenceTable::read_pairs_tsv("a\tb\tx\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
        let err = CooccurrenceTable::read_pairs_tsv("# c\na\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 2, .. }));
        let err = CooccurrenceTable::read_pairs_tsv("a\tb\t0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn class_counts() {
        let t = s1();
        assert_eq!(class_count(&t, &[0, 2], &[0]).unwrap(), 3);
        assert_eq!(class_count(&t, &[0], &[0, 1]).unwrap(), t.row_marginals()[0]);
        assert_eq!(class_count(&t, &[], &[0, 1]).unwrap(), 0);
        assert!(matches!(class_count(&t, &[3], &[0]), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
        assert!(class_count(&t, &[0], &[2]).is_err());
    }

    #[test]
    fn from_matrix_rejects_empty_rows_and_duplicates() {
        let words = |ws: &[&str]| ws.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(CooccurrenceTable::from_matrix(words(&["a", "b"]), words(&["x"]), vec![vec![1], vec![0]]).is_err());
        assert!(CooccurrenceTable::from_matrix(words(&["a", "a"]), words(&["x"]), vec![vec![1], vec![1]]).is_err());
        assert!(CooccurrenceTable::from_matrix(words(&["a"]), words(&["x", "y"]), vec![vec![1, 0]]).is_err());
        assert!(CooccurrenceTable::from_matrix(words(&["a"]), words(&["x"]), vec![vec![1, 2]]).is_err());
        let t = CooccurrenceTable::from_matrix(words(&["a", "b"]), words(&["x"]), vec![vec![1], vec![4]]).unwrap();
        assert_eq!(t.total(), 5);
    }

    #[test]
    fn transpose_swaps_sides() {
        let t = s1().transposed();
        assert_eq!((t.n_rows(), t.n_cols()), (2, 3));
        assert_eq!(t.count_words("v1", "n3"), 1);
        assert_eq!(t.row_marginals(), &[3, 3]);
    }

    #[test]
    fn triples_group_by_relation() {
        let ds = TripleDataset::ingest_triples([
            ("see", "with", "telescope", 1),
            ("buy", "for", "money", 2),
            ("see", "with", "friend", 3),
        ])
        .unwrap();
        assert_eq!(ds.len(), 3);
        let with = ds.to_table("with").unwrap();
        assert_eq!(with.total(), 4);
        assert_eq!(with.col_vocab(), &["telescope", "friend"]);
        assert!(with.row_id("buy").is_none());
        assert!(ds.to_table("via").is_none());
        assert_eq!(ds.relations_by_frequency(), vec![("with".to_string(), 4), ("for".to_string(), 2)]);
    }

    #[test]
    fn empty_relation_is_rejected() {
        let err = TripleDataset::ingest_triples([("see", "", "telescope", 1)]).unwrap_err();
        assert!(err.to_string().contains("relation"));
        let err = TripleDataset::read_tsv("see\twith\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn records() -> impl Strategy<Value = Vec<(String, String, i64)>> {
            prop::collection::vec((0u8..5, 0u8..4, 1i64..6), 1..30)
                .prop_map(|v| v.into_iter().map(|(r, c, f)| (format!("r{r}"), format!("c{c}"), f)).collect())
        }

        proptest! {
            #[test]
            fn marginals_are_consistent(recs in records()) {
                let t = CooccurrenceTable::ingest_pairs(recs.clone()).unwrap();
                let expect: i64 = recs.iter().map(|r| r.2).sum();
                prop_assert_eq!(t.total() as i64, expect);
                prop_assert_eq!(t.row_marginals().iter().sum::<u64>(), t.total());
                prop_assert_eq!(t.col_marginals().iter().sum::<u64>(), t.total());
                prop_assert!(t.row_marginals().iter().all(|&f| f > 0));
                let all_cols: Vec<usize> = (0..t.n_cols()).collect();
                let halves: (Vec<usize>, Vec<usize>) = (0..t.n_rows()).partition(|i| i % 2 == 0);
                let sum = class_count(&t, &halves.0, &all_cols).unwrap() + class_count(&t, &halves.1, &all_cols).unwrap();
                prop_assert_eq!(sum, t.total());
            }

            #[test]
            fn ingestion_is_order_insensitive(recs in records(), seed in any::<u64>()) {
                let a = CooccurrenceTable::ingest_pairs(recs.clone()).unwrap();
                let mut shuffled = recs;
                let mut rng = crate::rng::SeededRng::new(seed);
                rng.shuffle(&mut shuffled);
                let b = CooccurrenceTable::ingest_pairs(shuffled).unwrap();
                for r in a.row_vocab() {
                    for c in a.col_vocab() {
                        prop_assert_eq!(a.count_words(r, c), b.count_words(r, c));
                    }
                }
                prop_assert_eq!(a.total(), b.total());
            }
        }
    }
}
