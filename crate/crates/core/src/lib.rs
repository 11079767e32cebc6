//! Probabilistic embeddings of concepts as boxes.
//!
//! Every concept is an axis-aligned box under a product probability measure.
//! Marginals are box volumes and joints are volumes of intersections, so any
//! conjunction of concepts (including negated ones) can be queried from a
//! model trained only on unary and pairwise targets.

pub mod dag;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod lattice;
pub mod measure;
pub mod model;
pub mod plot;
pub mod poe;
pub mod query;
pub mod train;

pub use dag::{asymmetrize, CpdTable, Digraph, SquareMatrix};
pub use data::{Hierarchy, ToySpec};
pub use error::{Error, Result};
pub use lattice::{correlation, join, meet, HyperBox, LatticeElement};
pub use measure::{cone_to_box, CoordinateCdf, MeasureKind, ProductMeasure};
pub use model::{Model, Vocab};
pub use query::{conditional, conditional_query, joint, query_prob, union_volume, Query};
pub use train::{fit, loss, project, Init, TrainConfig, TrainExample, Trainer};
