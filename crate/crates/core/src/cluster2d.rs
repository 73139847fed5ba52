//! Greedy MDL co-clustering.
//!
//! The engine keeps a working matrix of class-pair counts `f(C_n, C_v)`. A merge of two
//! row classes `i < j` adds row `j` into row `i`, moves the last row into slot `j` and
//! shrinks the matrix by one row; columns are handled symmetrically.
//!
//! For each candidate pair the increase in data description length is
//!
//! ```text
//! dL = - sum_C (f_i(C) + f_j(C)) log2((f_i(C) + f_j(C)) / (f(C_i) + f(C_j)))
//!      + sum_C f_i(C) log2(f_i(C) / f(C_i))
//!      + sum_C f_j(C) log2(f_j(C) / f(C_j))
//! ```
//!
//! with `C` ranging over the classes of the opposite side. In MDL mode a merge is
//! admissible when `dL / m < dk log2(m) / (2 m)`, `dk` being the drop in free parameters.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceTable;
use crate::error::{Error, Result};
use crate::hardmodel::{DescriptionLength, HardClusterModel, Partition, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Row,
    Col,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Row => Side::Col,
            Side::Col => Side::Row,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Row => "row",
            Side::Col => "col",
        }
    }
}

/// A proposed merge of live classes `i < j` on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCandidate {
    pub i: usize,
    pub j: usize,
    pub delta_per_sample: f64,
    pub delta_total: f64,
}

/// An executed merge.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeRecord {
    pub side: Side,
    /// Positions of the two classes in the working matrix when the merge happened.
    pub merged: (usize, usize),
    /// Position of the merged class afterwards (always `merged.0`).
    pub result: usize,
    /// Word indices of the two classes before merging.
    pub members_i: Vec<usize>,
    pub members_j: Vec<usize>,
    pub delta_total: f64,
    /// `dk log2(m) / 2`; `None` for fixed-size runs, which have no threshold.
    pub threshold_total: Option<f64>,
    pub iteration: usize,
    /// Per-side round counter; merges from one round share it.
    pub batch: usize,
}

/// What one call of the merge procedure saw and did.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub side: Side,
    pub iteration: usize,
    pub batch: usize,
    pub threshold_total: Option<f64>,
    pub evaluated: usize,
    pub executed: Vec<MergeRecord>,
    /// Admissible candidates passed over because one of their classes was already merged
    /// this round, or the merge budget was spent.
    pub skipped: usize,
    /// Number of candidates that failed the threshold.
    pub rejected: usize,
    /// The smallest-delta candidate that failed the threshold.
    pub best_rejected: Option<MergeCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterConfig {
    pub b_n: usize,
    pub b_v: usize,
    /// Worker threads for candidate evaluation; results do not depend on it.
    pub threads: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { b_n: 1, b_v: 1, threads: 1 }
    }
}

#[derive(Debug, Clone, Copy)]
enum RoundMode {
    Mdl,
    /// Merge without threshold until this many classes remain.
    Target(usize),
}

/// Increase in data description length, in bits, from merging two class vectors.
///
/// `self_a` is `sum_C a(C) log2(a(C) / f_a)`, likewise `self_b`.
fn merge_delta(a: &[u64], fa: u64, self_a: f64, b: &[u64], fb: u64, self_b: f64) -> f64 {
    let fab = (fa + fb) as f64;
    let mut merged = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let s = x + y;
        if s > 0 {
            let s = s as f64;
            merged += s * (s / fab).log2();
        }
    }
    (self_a + self_b - merged).max(0.0)
}

fn self_term(v: &[u64], total: u64) -> f64 {
    let t = total as f64;
    v.iter()
        .filter(|&&x| x > 0)
        .map(|&x| {
            let x = x as f64;
            x * (x / t).log2()
        })
        .sum()
}

/// Mutable state of a clustering run over one table.
pub struct ClusterState<'a> {
    table: &'a CooccurrenceTable,
    /// Working matrix, one `Vec` per live row class.
    matrix: Vec<Vec<u64>>,
    row_classes: Vec<Vec<usize>>,
    col_classes: Vec<Vec<usize>>,
    row_totals: Vec<u64>,
    col_totals: Vec<u64>,
    row_tree: Dendrogram,
    col_tree: Dendrogram,
    row_nodes: Vec<usize>,
    col_nodes: Vec<usize>,
    history: Vec<MergeRecord>,
    rounds: Vec<RoundReport>,
    row_batches: usize,
    col_batches: usize,
    iteration: usize,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> ClusterState<'a> {
    /// Singleton classes on both sides.
    pub fn new(table: &'a CooccurrenceTable, threads: usize) -> Self {
        let (n, v) = (table.n_rows(), table.n_cols());
        let matrix = (0..n).map(|i| table.row(i).to_vec()).collect();
        let pool = (threads > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to start worker threads")
        });
        ClusterState {
            table,
            matrix,
            row_classes: (0..n).map(|i| vec![i]).collect(),
            col_classes: (0..v).map(|j| vec![j]).collect(),
            row_totals: table.row_marginals().to_vec(),
            col_totals: table.col_marginals().to_vec(),
            row_tree: Dendrogram::leaves(table.row_vocab()),
            col_tree: Dendrogram::leaves(table.col_vocab()),
            row_nodes: (0..n).collect(),
            col_nodes: (0..v).collect(),
            history: Vec::new(),
            rounds: Vec::new(),
            row_batches: 0,
            col_batches: 0,
            iteration: 0,
            pool,
        }
    }

    pub fn table(&self) -> &CooccurrenceTable {
        self.table
    }

    pub fn n_classes(&self, side: Side) -> usize {
        match side {
            Side::Row => self.row_classes.len(),
            Side::Col => self.col_classes.len(),
        }
    }

    pub fn classes(&self, side: Side) -> &[Vec<usize>] {
        match side {
            Side::Row => &self.row_classes,
            Side::Col => &self.col_classes,
        }
    }

    /// Current classes as a [`Partition`] whose class `k` is working-matrix slot `k`.
    pub fn partition(&self, side: Side) -> Partition {
        let len = match side {
            Side::Row => self.table.n_rows(),
            Side::Col => self.table.n_cols(),
        };
        Partition::from_classes(len, self.classes(side).to_vec()).expect("engine classes form a partition")
    }

    /// Working-matrix cell `f(C_i, C_j)`.
    pub fn class_pair_count(&self, row_class: usize, col_class: usize) -> u64 {
        self.matrix[row_class][col_class]
    }

    pub fn history(&self) -> &[MergeRecord] {
        &self.history
    }

    pub fn rounds(&self) -> &[RoundReport] {
        &self.rounds
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Starts a new alternation (one row round and one column round).
    pub fn next_iteration(&mut self) {
        self.iteration += 1;
    }

    pub fn model(&self, variant: Variant) -> HardClusterModel {
        HardClusterModel::mle_estimate(self.table, &self.partition(Side::Row), &self.partition(Side::Col), variant)
            .expect("engine partitions match the table")
    }

    /// Class vectors and totals for one side (rows of the working matrix, or its columns).
    fn side_vectors(&self, side: Side) -> (Vec<Vec<u64>>, Vec<u64>) {
        match side {
            Side::Row => (self.matrix.clone(), self.row_totals.clone()),
            Side::Col => {
                let kc = self.col_classes.len();
                let cols = (0..kc).map(|c| self.matrix.iter().map(|r| r[c]).collect()).collect();
                (cols, self.col_totals.clone())
            }
        }
    }

    /// `dk log2(m) / 2` for a merge on `side`: one fewer class there frees
    /// `|T_other| - 1` joint parameters.
    pub fn threshold_total(&self, side: Side) -> f64 {
        let dk = self.n_classes(side.other()).saturating_sub(1) as f64;
        dk * (self.table.total() as f64).log2() / 2.0
    }

    /// Data-length increase from merging live classes `i` and `j`.
    pub fn delta_ldat(&self, side: Side, i: usize, j: usize) -> Result<MergeCandidate> {
        let live = self.n_classes(side);
        for c in [i, j] {
            if c >= live {
                return Err(Error::DeadClass(c));
            }
        }
        if i == j {
            return Err(Error::InvalidPartition(format!("cannot merge class {i} with itself")));
        }
        let (i, j) = (i.min(j), i.max(j));
        let (vecs, totals) = self.side_vectors(side);
        let delta_total = merge_delta(
            &vecs[i],
            totals[i],
            self_term(&vecs[i], totals[i]),
            &vecs[j],
            totals[j],
            self_term(&vecs[j], totals[j]),
        );
        Ok(self.candidate(i, j, delta_total))
    }

    fn candidate(&self, i: usize, j: usize, delta_total: f64) -> MergeCandidate {
        MergeCandidate {
            i,
            j,
            delta_per_sample: delta_total / self.table.total() as f64,
            delta_total,
        }
    }

    /// Every live pair `i < j` on `side`, in lexicographic order.
    pub fn candidates(&self, side: Side) -> Vec<MergeCandidate> {
        let (vecs, totals) = self.side_vectors(side);
        let k = vecs.len();
        let selfs: Vec<f64> = vecs.iter().zip(&totals).map(|(v, &t)| self_term(v, t)).collect();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let eval = |&(i, j): &(usize, usize)| {
            let d = merge_delta(&vecs[i], totals[i], selfs[i], &vecs[j], totals[j], selfs[j]);
            self.candidate(i, j, d)
        };
        match &self.pool {
            Some(pool) => pool.install(|| pairs.par_iter().map(eval).collect()),
            None => pairs.iter().map(eval).collect(),
        }
    }

    /// One Merge call in MDL mode with at most `b` merges.
    pub fn merge_round(&mut self, side: Side, b: usize) -> RoundReport {
        self.run_round(side, b, RoundMode::Mdl)
    }

    /// One Merge call without threshold, stopping once `target` classes remain.
    pub fn merge_round_to_target(&mut self, side: Side, b: usize, target: usize) -> RoundReport {
        self.run_round(side, b, RoundMode::Target(target))
    }

    fn run_round(&mut self, side: Side, b: usize, mode: RoundMode) -> RoundReport {
        assert!(b >= 1, "merge budget must be positive");
        let batch = match side {
            Side::Row => &mut self.row_batches,
            Side::Col => &mut self.col_batches,
        };
        *batch += 1;
        let batch = *batch;
        let live = self.n_classes(side);
        let m = self.table.total() as f64;
        let (threshold_total, budget) = match mode {
            RoundMode::Mdl => (Some(self.threshold_total(side)), b),
            RoundMode::Target(t) => (None, b.min(live.saturating_sub(t))),
        };
        let mut report = RoundReport {
            side,
            iteration: self.iteration,
            batch,
            threshold_total,
            evaluated: 0,
            executed: Vec::new(),
            skipped: 0,
            rejected: 0,
            best_rejected: None,
        };
        if live < 2 || budget == 0 {
            self.rounds.push(report.clone());
            return report;
        }

        let all = self.candidates(side);
        report.evaluated = all.len();
        let (mut admissible, rejected): (Vec<_>, Vec<_>) = match threshold_total {
            Some(t) => {
                let per_sample = t / m;
                all.into_iter().partition(|c| c.delta_per_sample < per_sample)
            }
            None => (all, Vec::new()),
        };
        report.rejected = rejected.len();
        report.best_rejected = rejected.into_iter().min_by(candidate_order);
        admissible.sort_by(candidate_order);

        // Round-start ids -> current working-matrix slots.
        let mut slot_of: Vec<usize> = (0..live).collect();
        let mut id_at: Vec<Option<usize>> = (0..live).map(Some).collect();
        let mut consumed = vec![false; live];
        for cand in admissible {
            if report.executed.len() == budget || consumed[cand.i] || consumed[cand.j] {
                report.skipped += 1;
                continue;
            }
            let (p, q) = {
                let (a, c) = (slot_of[cand.i], slot_of[cand.j]);
                (a.min(c), a.max(c))
            };
            let record = self.merge_slots(side, p, q, cand.delta_total, threshold_total, batch);
            consumed[cand.i] = true;
            consumed[cand.j] = true;
            id_at[p] = None;
            id_at.swap_remove(q);
            if let Some(Some(moved)) = id_at.get(q) {
                slot_of[*moved] = q;
            }
            report.executed.push(record);
        }
        log::debug!(
            "iteration {} {} round: {} classes, {} candidates, {} merged, {} rejected",
            self.iteration,
            side.as_str(),
            live,
            report.evaluated,
            report.executed.len(),
            report.rejected
        );
        self.rounds.push(report.clone());
        report
    }

    /// Merges working-matrix slots `p < q` on `side`.
    fn merge_slots(
        &mut self,
        side: Side,
        p: usize,
        q: usize,
        delta_total: f64,
        threshold_total: Option<f64>,
        batch: usize,
    ) -> MergeRecord {
        debug_assert!(p < q);
        let (classes, totals, nodes, tree) = match side {
            Side::Row => {
                let moved = self.matrix.swap_remove(q);
                for (dst, src) in self.matrix[p].iter_mut().zip(moved) {
                    *dst += src;
                }
                (&mut self.row_classes, &mut self.row_totals, &mut self.row_nodes, &mut self.row_tree)
            }
            Side::Col => {
                for row in &mut self.matrix {
                    let moved = row.swap_remove(q);
                    row[p] += moved;
                }
                (&mut self.col_classes, &mut self.col_totals, &mut self.col_nodes, &mut self.col_tree)
            }
        };
        let members_j = classes.swap_remove(q);
        let members_i = classes[p].clone();
        classes[p].extend(&members_j);
        classes[p].sort_unstable();
        let moved_total = totals.swap_remove(q);
        totals[p] += moved_total;
        let node_j = nodes.swap_remove(q);
        let node = tree.join(nodes[p], node_j, delta_total, self.iteration, batch);
        nodes[p] = node;

        let record = MergeRecord {
            side,
            merged: (p, q),
            result: p,
            members_i,
            members_j,
            delta_total,
            threshold_total,
            iteration: self.iteration,
            batch,
        };
        self.history.push(record.clone());
        record
    }

    /// Compares every working-matrix cell with a fresh sum over the original table.
    pub fn working_matrix_consistent(&self) -> bool {
        let mut ok = self.matrix.len() == self.row_classes.len();
        for (r, rc) in self.row_classes.iter().enumerate() {
            ok &= self.matrix[r].len() == self.col_classes.len();
            for (c, cc) in self.col_classes.iter().enumerate() {
                let direct = crate::cooccur::class_count(self.table, rc, cc).unwrap_or(u64::MAX);
                ok &= self.matrix[r][c] == direct;
            }
        }
        ok
    }

    pub fn finish(self) -> ClusterOutcome {
        let model = self.model(Variant::Full);
        let final_length = model
            .total_description_length(self.table)
            .expect("MLE model assigns positive probability to observed pairs");
        let mut row_tree = self.row_tree;
        row_tree.roots = self.row_nodes;
        let mut col_tree = self.col_tree;
        col_tree.roots = self.col_nodes;
        ClusterOutcome {
            row_dendrogram: row_tree,
            col_dendrogram: col_tree,
            model,
            history: self.history,
            rounds: self.rounds,
            iterations: self.iteration,
            initial_length: initial_length(self.table),
            final_length,
        }
    }
}

/// Ascending delta, then lexicographic class pair.
fn candidate_order(a: &MergeCandidate, b: &MergeCandidate) -> std::cmp::Ordering {
    a.delta_per_sample
        .total_cmp(&b.delta_per_sample)
        .then_with(|| (a.i, a.j).cmp(&(b.i, b.j)))
}

fn initial_length(table: &CooccurrenceTable) -> DescriptionLength {
    HardClusterModel::mle_estimate(
        table,
        &Partition::singletons(table.n_rows()),
        &Partition::singletons(table.n_cols()),
        Variant::Full,
    )
    .and_then(|m| m.total_description_length(table))
    .expect("singleton model is well defined")
}

/// Result of a full clustering run.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub row_dendrogram: Dendrogram,
    pub col_dendrogram: Dendrogram,
    /// MLE model for the final partitions.
    pub model: HardClusterModel,
    pub history: Vec<MergeRecord>,
    pub rounds: Vec<RoundReport>,
    pub iterations: usize,
    pub initial_length: DescriptionLength,
    pub final_length: DescriptionLength,
}

impl ClusterOutcome {
    /// Merge history as TSV with a header line.
    pub fn history_tsv(&self) -> String {
        let table_words = |side: Side| match side {
            Side::Row => self.model.row_vocab(),
            Side::Col => self.model.col_vocab(),
        };
        let mut out = String::from("side\titeration\tclass_i_members\tclass_j_members\tdelta_total\tthreshold_total\n");
        for r in &self.history {
            let words = table_words(r.side);
            let join = |ids: &[usize]| ids.iter().map(|&x| words[x].as_str()).collect::<Vec<_>>().join(",");
            let threshold = r.threshold_total.map_or_else(|| "-".to_string(), |t| t.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.side.as_str(),
                r.iteration,
                join(&r.members_i),
                join(&r.members_j),
                r.delta_total,
                threshold
            );
        }
        out
    }
}

/// Alternates MDL merge rounds over rows then columns until an alternation changes nothing.
pub fn cluster_2d(table: &CooccurrenceTable, config: ClusterConfig) -> ClusterOutcome {
    assert!(config.b_n >= 1 && config.b_v >= 1, "b_n and b_v must be positive");
    let mut state = ClusterState::new(table, config.threads);
    loop {
        state.next_iteration();
        let rows = state.merge_round(Side::Row, config.b_n);
        let cols = state.merge_round(Side::Col, config.b_v);
        if rows.executed.is_empty() && cols.executed.is_empty() {
            break;
        }
    }
    state.finish()
}

/// The same alternating loop with no threshold: each side keeps merging its cheapest pair
/// until it is down to its target class count. Targets at or above the vocabulary size
/// leave that side untouched.
pub fn brown_cluster(
    table: &CooccurrenceTable,
    target_row_classes: usize,
    target_col_classes: usize,
    config: ClusterConfig,
) -> ClusterOutcome {
    assert!(config.b_n >= 1 && config.b_v >= 1, "b_n and b_v must be positive");
    let target_rows = target_row_classes.max(1);
    let target_cols = target_col_classes.max(1);
    let mut state = ClusterState::new(table, config.threads);
    while state.n_classes(Side::Row) > target_rows || state.n_classes(Side::Col) > target_cols {
        state.next_iteration();
        state.merge_round_to_target(Side::Row, config.b_n, target_rows);
        state.merge_round_to_target(Side::Col, config.b_v, target_cols);
    }
    state.finish()
}

/// Plug-in average mutual information `I(T_n, T_v)` in bits.
pub fn mutual_information(table: &CooccurrenceTable, row_partition: &Partition, col_partition: &Partition) -> f64 {
    let (kr, kc) = (row_partition.n_classes(), col_partition.n_classes());
    let mut joint = vec![0u64; kr * kc];
    for (i, j, f) in table.nonzero() {
        joint[row_partition.class_of(i) * kc + col_partition.class_of(j)] += f;
    }
    let mut row_tot = vec![0u64; kr];
    let mut col_tot = vec![0u64; kc];
    for a in 0..kr {
        for c in 0..kc {
            row_tot[a] += joint[a * kc + c];
            col_tot[c] += joint[a * kc + c];
        }
    }
    let m = table.total() as f64;
    let mut mi = 0.0;
    for a in 0..kr {
        for c in 0..kc {
            let f = joint[a * kc + c];
            if f > 0 {
                let f = f as f64;
                mi += f / m * (f * m / (row_tot[a] as f64 * col_tot[c] as f64)).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Merge-history tree over one vocabulary.
///
/// Leaves are words; each executed merge adds a binary node. Merges from the same
/// round carry the same `batch`, so [`Dendrogram::batch_children`] can rebuild the
/// at-most-b-ary view.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    nodes: Vec<DendrogramNode>,
    roots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DendrogramNode {
    /// Set on leaves.
    pub word: Option<String>,
    pub children: Vec<usize>,
    pub delta_total: f64,
    pub iteration: usize,
    pub batch: usize,
}

impl Dendrogram {
    fn leaves(words: &[String]) -> Self {
        Dendrogram {
            nodes: words
                .iter()
                .map(|w| DendrogramNode {
                    word: Some(w.clone()),
                    children: Vec::new(),
                    delta_total: 0.0,
                    iteration: 0,
                    batch: 0,
                })
                .collect(),
            roots: (0..words.len()).collect(),
        }
    }

    fn join(&mut self, a: usize, b: usize, delta_total: f64, iteration: usize, batch: usize) -> usize {
        self.nodes.push(DendrogramNode {
            word: None,
            children: vec![a, b],
            delta_total,
            iteration,
            batch,
        });
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[DendrogramNode] {
        &self.nodes
    }

    /// One root per final class, in working-matrix order.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Words under `node`, left to right.
    pub fn leaves_under(&self, node: usize) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            let nd = &self.nodes[n];
            match &nd.word {
                Some(w) => out.push(w.as_str()),
                None => stack.extend(nd.children.iter().rev()),
            }
        }
        out
    }

    /// Children of `node` with same-batch internal children flattened into it.
    pub fn batch_children(&self, node: usize) -> Vec<usize> {
        let batch = self.nodes[node].batch;
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.nodes[node].children.iter().rev().copied().collect();
        while let Some(c) = stack.pop() {
            let child = &self.nodes[c];
            if child.word.is_none() && child.batch == batch {
                stack.extend(child.children.iter().rev());
            } else {
                out.push(c);
            }
        }
        out
    }

    /// Newick text, one tree per final class, each terminated by `;`. Internal nodes are
    /// labelled `m<iteration>:<delta_total>`.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        for &root in &self.roots {
            self.write_newick(root, &mut out);
            out.push_str(";\n");
        }
        out
    }

    fn write_newick(&self, root: usize, out: &mut String) {
        enum Step {
            Enter(usize),
            Sep,
            Close(usize),
        }
        let mut stack = vec![Step::Enter(root)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(n) => {
                    let node = &self.nodes[n];
                    if let Some(w) = &node.word {
                        out.push_str(&newick_name(w));
                        continue;
                    }
                    out.push('(');
                    stack.push(Step::Close(n));
                    for (k, &c) in node.children.iter().enumerate().rev() {
                        stack.push(Step::Enter(c));
                        if k > 0 {
                            stack.push(Step::Sep);
                        }
                    }
                }
                Step::Sep => out.push(','),
                Step::Close(n) => {
                    let node = &self.nodes[n];
                    let _ = write!(out, ")m{}:{:.6}", node.iteration, node.delta_total);
                }
            }
        }
    }

    /// Indented listing: internal nodes as `[m<iteration> dL=<bits>]`, words beneath.
    pub fn to_thesaurus(&self) -> String {
        let mut out = String::new();
        for &root in &self.roots {
            let mut stack = vec![(root, 0usize)];
            while let Some((n, depth)) = stack.pop() {
                let node = &self.nodes[n];
                for _ in 0..depth {
                    out.push_str("  ");
                }
                match &node.word {
                    Some(w) => {
                        out.push_str(w);
                        out.push('\n');
                    }
                    None => {
                        let _ = writeln!(out, "[m{} dL={:.6}]", node.iteration, node.delta_total);
                        stack.extend(node.children.iter().rev().map(|&c| (c, depth + 1)));
                    }
                }
            }
        }
        out
    }
}

fn newick_name(word: &str) -> String {
    let special = |c: char| c.is_whitespace() || "()[]':;,".contains(c);
    if word.chars().any(special) {
        format!("'{}'", word.replace('\'', "''"))
    } else {
        word.to_string()
    }
}
