//! Two-dimensional hard co-clustering of co-occurrence data under the Minimum
//! Description Length principle.
//!
//! The crate is organized bottom-up:
//!
//! * [`cooccur`] ingests `(row, column, count)` records into a [`CooccurrenceTable`]
//!   and groups `(head, relation, dependent)` triples per relation.
//! * [`hardmodel`] holds partitions, the hard clustering model
//!   `P(n,v) = P(C_n,C_v) P(n|C_n) P(v|C_v)`, its maximum likelihood estimate and the
//!   model/data/total description lengths.
//! * [`cluster2d`] is the greedy engine: merge deltas, the MDL threshold, the
//!   alternating row/column merge loop, the fixed-size baseline and dendrograms.
//! * [`disambig`] turns trained models into attachment decisions with a back-off chain.
//! * [`evalharness`] runs k-fold evaluation and renders comparison tables.
//! * [`oracle`] contains brute-force reference routines used by the test suites.

pub mod cluster2d;
pub mod cooccur;
pub mod disambig;
pub mod error;
pub mod evalharness;
pub mod hardmodel;
pub mod oracle;
pub mod rng;

pub use cluster2d::{
    brown_cluster, cluster_2d, mutual_information, ClusterConfig, ClusterOutcome, ClusterState,
    Dendrogram, MergeCandidate, MergeRecord, Side,
};
pub use cooccur::{class_count, CooccurrenceTable, Triple, TripleDataset};
pub use error::{Error, Result};
pub use hardmodel::{DescriptionLength, HardClusterModel, Partition, Variant};
