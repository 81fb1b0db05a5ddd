//! Dialogue state tracking with an open-vocabulary candidate scorer, a joint
//! fixed-vocabulary tracker, and a per-slot hybrid of the two.

pub mod candidates;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hybrid;
pub mod jsonl;
pub mod jst;
pub mod nn;
pub mod ontology;
pub mod ov;
pub mod predictions;
pub mod slots;
pub mod state;
pub mod stats;
pub mod synthetic;
pub mod text;
