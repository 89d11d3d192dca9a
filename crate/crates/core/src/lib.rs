//! Balanced allocation of balls into the nodes of a `d`-regular graph where
//! each ball inspects the nodes visited by a non-backtracking random walk and
//! settles on a least-loaded one.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] builds and validates regular graphs (random, fixtures, files)
//!   and measures their girth.
//! * [`walker`] samples non-backtracking walks and turns them into choice sets.
//! * [`oracle`] enumerates walks exhaustively; tests use it as ground truth.
//! * [`allocator`] runs the allocation processes and records full traces.
//! * [`params`] evaluates the parameter schedule and the maximum-load guides.
//! * [`metrics`] computes path multiplicities, uniformity, and potentials.
//! * [`witness`] builds and verifies witness trees over a finished trace.
//! * [`harness`] drives seeded experiment sweeps and writes CSV output.

pub mod allocator;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod trace;
pub mod walker;
pub mod witness;

pub use allocator::{allocate_one, max_load, run_allocation, AllocationTrace, BallRecord, ReplayViolation, Strategy};
pub use error::{Error, Result};
pub use graph::{
    check_girth_condition, generate_random_regular, girth, load_fixture, GirthReport, GraphKind, GraphSpec, NodeId,
    RegularGraph,
};
pub use params::{bounds, derive, BoundReport, DerivedParams, Mode, Regime};
pub use walker::{make_choice_set, sample_nbrw, walk_visit_stats, ChoiceSet, VisitStats, Walk};
pub use witness::{build_witness, verify_witness_tree, WitnessParams, WitnessTree};
