//! Exact simulation of a memory attack on privacy amplification with
//! chained-Bell non-signalling boxes.
//!
//! [`box_lab`] builds single boxes, [`system`] composes them into n-pair
//! systems and partitions, [`ns`] checks non-signalling conditions, [`hash`]
//! holds hash functions and the pivotal-index machinery, and [`attack`]
//! computes distances from uniform.

pub mod attack;
pub mod bits;
pub mod box_lab;
pub mod error;
pub mod hash;
pub mod mutants;
pub mod ns;
pub mod system;
pub mod value;

pub use attack::{run_attack, AttackReport, Strategy};
pub use box_lab::{BoxParams, Mode};
pub use error::{Error, Result};
pub use hash::{FunctionSpec, HashFunction, PivotalProfile};
pub use value::{Number, Rat};
