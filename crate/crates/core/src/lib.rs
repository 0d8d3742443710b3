//! Semantic discriminability of feature–concept encodings.
//!
//! Starting from a table of feature–concept associations, this crate
//! computes distribution metrics (entropy, total variation and its
//! multi-concept generalization), solves merit-based assignment problems to
//! pick palettes, and estimates semantic distance, semantic contrast and
//! capacity under a Gaussian rating-noise model with seeded Monte Carlo.
//!
//! ```
//! use semdisc::model::AssociationTable;
//! use semdisc::stochastic::semantic_distance_analytic;
//!
//! let table = AssociationTable::from_rows(&[[0.8, 0.2], [0.2, 0.8]]).unwrap();
//! let delta_s = semantic_distance_analytic(&table).unwrap();
//! assert!((delta_s - 0.9926).abs() < 1e-4);
//! ```

pub mod analysis;
pub mod assignment;
pub mod capacity;
pub mod error;
pub mod io;
pub mod model;
pub mod stochastic;

pub use error::{Error, Result};
