//! Executable simulator, property-test harness, and bounded model checker
//! for a memory-efficient self-stabilizing BFS spanning-tree algorithm in
//! the atomic-state model.
//!
//! The system is a rooted connected network whose processes each hold five
//! shared variables: two parent pointers (P and TS), a color, a status, and
//! a phase bit, for 2·⌈log2(δ+1)⌉ + 5 bits per process. Recovery rules
//! RC1-RC6 dismantle illegal trees and break cycles; construction rules
//! R1-R7 grow BFS spanning trees of alternating color, one distance level
//! per phase. This crate simulates the algorithm under a family of daemon
//! (scheduler) policies, measures round complexity against the published
//! bounds, and model-checks the closure and liveness properties
//! exhaustively on small topologies.

pub mod analysis;
pub mod cli;
pub mod daemon;
pub mod model;
pub mod predicates;
pub mod rules;
