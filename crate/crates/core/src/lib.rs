//! Distribution-robust multi-instance learning.
//!
//! Bags of feature vectors are classified by first learning a pool of
//! *stable* instances, those whose addition to a negative bag flips a base
//! classifier's prediction, and then embedding every bag by its similarity
//! to the pool.
//!
//! ```no_run
//! use stablemil::bench::{biased_split, generate_population, ShiftConfig};
//! use stablemil::eval::{run_stablemil, ExperimentConfig};
//!
//! let population = generate_population(&ShiftConfig::setting1()).unwrap();
//! let split = biased_split(&population, 0.8, 1).unwrap();
//! let run = run_stablemil(&split.train, &split.test, &ExperimentConfig::default(), 1).unwrap();
//! println!("accuracy {}", run.accuracy);
//! ```

pub mod base;
pub mod bench;
pub mod embed;
pub mod error;
pub mod eval;
pub mod fmt;
pub mod mil;
pub mod numopt;
pub mod seeds;
pub mod select;

pub use error::{Error, Result};
pub use mil::{Bag, Instance, InstanceRole, MilDataset};
