//! Brute-force references for testing: exhaustive partition search, from-scratch deltas
//! and synthetic tables. Nothing here is meant for production-sized inputs.

use crate::cluster2d::Side;
use crate::cooccur::CooccurrenceTable;
use crate::error::{Error, Result};
use crate::hardmodel::{DescriptionLength, HardClusterModel, Partition, Variant};
use crate::rng::SeededRng;

/// Largest vocabulary [`SetPartitions`] will enumerate.
pub const ENUMERATION_LIMIT: usize = 10;
/// Largest side [`exhaustive_best`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// All set partitions of `0..n` as restricted growth strings, in lexicographic order:
/// `a[0] = 0` and `a[i] <= 1 + max(a[..i])`.
#[derive(Debug, Clone)]
pub struct SetPartitions {
    labels: Vec<usize>,
    done: bool,
}

impl SetPartitions {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > ENUMERATION_LIMIT {
            return Err(Error::GuardExceeded(format!(
                "set partitions of {n} elements (supported: 1..={ENUMERATION_LIMIT})"
            )));
        }
        Ok(SetPartitions { labels: vec![0; n], done: false })
    }

    fn advance(&mut self) {
        let n = self.labels.len();
        // rightmost position that can still grow
        for i in (1..n).rev() {
            let max_prefix = self.labels[..i].iter().copied().max().unwrap_or(0);
            if self.labels[i] <= max_prefix {
                self.labels[i] += 1;
                for x in &mut self.labels[i + 1..] {
                    *x = 0;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for SetPartitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let p = Partition::from_labels(&self.labels);
        self.advance();
        Some(p)
    }
}

/// Global MDL optimum over every pair of row and column partitions.
///
/// Ties keep the first pair in enumeration order (rows outer, columns inner).
pub fn exhaustive_best(
    table: &CooccurrenceTable,
    max_n: usize,
    max_v: usize,
) -> Result<(Partition, Partition, DescriptionLength)> {
    if max_n > EXHAUSTIVE_LIMIT || max_v > EXHAUSTIVE_LIMIT {
        return Err(Error::GuardExceeded(format!(
            "limits {max_n} x {max_v} exceed {EXHAUSTIVE_LIMIT} x {EXHAUSTIVE_LIMIT}"
        )));
    }
    if table.n_rows() > max_n || table.n_cols() > max_v {
        return Err(Error::GuardExceeded(format!(
            "table is {} x {}, limit {max_n} x {max_v}",
            table.n_rows(),
            table.n_cols()
        )));
    }
    let col_parts: Vec<Partition> = SetPartitions::new(table.n_cols())?.collect();
    let mut best: Option<(Partition, Partition, DescriptionLength)> = None;
    for rp in SetPartitions::new(table.n_rows())? {
        for cp in &col_parts {
            let dl = HardClusterModel::mle_estimate(table, &rp, cp, Variant::Full)?.total_description_length(table)?;
            if best.as_ref().map_or(true, |b| dl.total_bits < b.2.total_bits) {
                best = Some((rp.clone(), cp.clone(), dl));
            }
        }
    }
    Ok(best.expect("at least one partition pair"))
}

/// `L(S | M_A) - L(S | M_B)` for merging classes `i` and `j` on `side`, with both data
/// lengths recomputed from scratch.
pub fn direct_delta(
    table: &CooccurrenceTable,
    row_partition: &Partition,
    col_partition: &Partition,
    side: Side,
    i: usize,
    j: usize,
) -> Result<f64> {
    let before = HardClusterModel::mle_estimate(table, row_partition, col_partition, Variant::Full)?;
    let (rp, cp) = match side {
        Side::Row => (row_partition.merged(i, j)?, col_partition.clone()),
        Side::Col => (row_partition.clone(), col_partition.merged(i, j)?),
    };
    let after = HardClusterModel::mle_estimate(table, &rp, &cp, Variant::Full)?;
    Ok(after.data_description_length(table)? - before.data_description_length(table)?)
}

/// A hard clustering model to sample synthetic data from.
#[derive(Debug, Clone)]
pub struct PlantedModel {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    /// `class_joint[a][c]`, need not be normalized.
    pub class_joint: Vec<Vec<f64>>,
    /// Within-class word weights, normalized per class at sampling time.
    pub row_weights: Vec<f64>,
    pub col_weights: Vec<f64>,
}

impl PlantedModel {
    pub fn row_partition(&self) -> Partition {
        Partition::from_labels(&self.row_labels)
    }

    pub fn col_partition(&self) -> Partition {
        Partition::from_labels(&self.col_labels)
    }
}

struct ClassSampler {
    members: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl ClassSampler {
    fn new(labels: &[usize], weights: &[f64]) -> Self {
        let k = labels.iter().copied().max().map_or(0, |x| x + 1);
        let mut members = vec![Vec::new(); k];
        for (x, &l) in labels.iter().enumerate() {
            members[l].push(x);
        }
        let cumulative = members
            .iter()
            .map(|ms| {
                ms.iter()
                    .scan(0.0, |acc, &x| {
                        *acc += weights[x];
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        ClassSampler { members, cumulative }
    }

    fn draw(&self, class: usize, rng: &mut SeededRng) -> usize {
        self.members[class][rng.weighted(&self.cumulative[class])]
    }
}

/// Synthetic `n x v` table with total `m`, words named `n<i>` and `v<j>`.
///
/// With a planted model, `m` pairs are drawn from it, so the true partitions are known;
/// a word that receives no sample makes the table invalid and is reported as an error.
/// Without one, every word first gets one count (a shuffled staircase, needing
/// `m >= max(n, v)`) and the remaining mass falls on uniformly random cells.
pub fn random_table(
    seed: u64,
    n: usize,
    v: usize,
    m: u64,
    planted: Option<&PlantedModel>,
) -> Result<CooccurrenceTable> {
    if n == 0 || v == 0 {
        return Err(Error::InvalidTable("table sides must be non-empty".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut matrix = vec![vec![0u64; v]; n];
    match planted {
        Some(p) => {
            if p.row_labels.len() != n || p.col_labels.len() != v {
                return Err(Error::DimensionMismatch("planted labels do not match table size".into()));
            }
            let rows = ClassSampler::new(&p.row_labels, &p.row_weights);
            let cols = ClassSampler::new(&p.col_labels, &p.col_weights);
            let kc = p.class_joint.first().map_or(0, Vec::len);
            let cumulative: Vec<f64> = p
                .class_joint
                .iter()
                .flatten()
                .scan(0.0, |acc, &w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            for _ in 0..m {
                let cell = rng.weighted(&cumulative);
                let (a, c) = (cell / kc, cell % kc);
                matrix[rows.draw(a, &mut rng)][cols.draw(c, &mut rng)] += 1;
            }
        }
        None => {
            let steps = n.max(v);
            if m < steps as u64 {
                return Err(Error::InvalidTable(format!("m = {m} cannot cover a {n} x {v} table")));
            }
            let mut row_order: Vec<usize> = (0..n).collect();
            let mut col_order: Vec<usize> = (0..v).collect();
            rng.shuffle(&mut row_order);
            rng.shuffle(&mut col_order);
            for k in 0..steps {
                matrix[row_order[k % n]][col_order[k % v]] += 1;
            }
            for _ in 0..m - steps as u64 {
                let cell = rng.below((n * v) as u64) as usize;
                matrix[cell / v][cell % v] += 1;
            }
        }
    }
    let rows = (0..n).map(|i| format!("n{i}")).collect();
    let cols = (0..v).map(|j| format!("v{j}")).collect();
    CooccurrenceTable::from_matrix(rows, cols, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1() -> CooccurrenceTable {
        CooccurrenceTable::ingest_pairs([("n1", "v1", 2), ("n2", "v2", 2), ("n3", "v1", 1), ("n3", "v2", 1)]).unwrap()
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|n| SetPartitions::new(n).unwrap().count()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
        assert!(SetPartitions::new(11).is_err());
    }

    #[test]
    fn enumeration_is_restricted_growth_order_without_repeats() {
        let labels: Vec<Vec<usize>> = SetPartitions::new(3).unwrap().map(|p| p.membership().to_vec()).collect();
        assert_eq!(labels, vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1], vec![0, 1, 2]]);
        let mut canon: Vec<_> = SetPartitions::new(5).unwrap().map(|p| p.canonical()).collect();
        canon.sort();
        canon.dedup();
        assert_eq!(canon.len(), 52);
    }

    #[test]
    fn s1_optimum_is_no_worse_than_greedy() {
        let (_, _, dl) = exhaustive_best(&s1(), 6, 6).unwrap();
        assert!(dl.total_bits <= 17.924812 + 1e-6);
    }

    #[test]
    fn trivial_and_guarded() {
        let t = CooccurrenceTable::ingest_pairs([("a", "x", 3)]).unwrap();
        let (rp, cp, dl) = exhaustive_best(&t, 6, 6).unwrap();
        assert_eq!((rp.n_classes(), cp.n_classes(), dl.total_bits), (1, 1, 0.0));
        assert!(matches!(exhaustive_best(&s1(), 7, 6), Err(Error::GuardExceeded(_))));
        assert!(matches!(exhaustive_best(&s1(), 2, 6), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn equal_rows_are_merged_by_the_optimum() {
        let t = CooccurrenceTable::ingest_pairs([("a", "x", 4), ("b", "x", 4)]).unwrap();
        let (rp, _, dl) = exhaustive_best(&t, 6, 6).unwrap();
        assert_eq!(rp.n_classes(), 1);
        assert_eq!(dl.free_params, 1);
    }

    #[test]
    fn direct_deltas_on_s1() {
        let t = s1();
        let (rp, cp) = (Partition::singletons(3), Partition::singletons(2));
        assert!((direct_delta(&t, &rp, &cp, Side::Row, 0, 2).unwrap() - 1.245112).abs() < 1e-6);
        assert!((direct_delta(&t, &rp, &cp, Side::Row, 0, 1).unwrap() - 4.0).abs() < 1e-9);
        let prop = CooccurrenceTable::ingest_pairs([("a", "x", 2), ("a", "y", 4), ("b", "x", 1), ("b", "y", 2)]).unwrap();
        let d = direct_delta(&prop, &Partition::singletons(2), &Partition::singletons(2), Side::Row, 0, 1).unwrap();
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn uniform_tables_are_reproducible_and_complete() {
        let a = random_table(5, 8, 6, 40, None).unwrap();
        let b = random_table(5, 8, 6, 40, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), 40);
        assert!(random_table(5, 8, 6, 7, None).is_err());
        let one = random_table(1, 1, 1, 9, None).unwrap();
        assert_eq!(one.count(0, 0), 9);
    }

    #[test]
    fn planted_sampling_matches_design() {
        let planted = PlantedModel {
            row_labels: vec![0, 0, 1, 1],
            col_labels: vec![0, 1, 0, 1],
            class_joint: vec![vec![0.4, 0.1], vec![0.2, 0.3]],
            row_weights: vec![1.0, 3.0, 1.0, 1.0],
            col_weights: vec![1.0; 4],
        };
        let m = 10_000u64;
        let t = random_table(9, 4, 4, m, Some(&planted)).unwrap();
        let model =
            HardClusterModel::mle_estimate(&t, &planted.row_partition(), &planted.col_partition(), Variant::Full).unwrap();
        for (a, row) in planted.class_joint.iter().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                let sigma = (p * (1.0 - p) / m as f64).sqrt();
                assert!((model.class_joint(a, c) - p).abs() < 3.0 * sigma, "cell ({a},{c})");
            }
        }
        assert!((model.row_conditional(1) - 0.75).abs() < 0.03);
    }
}
