//! Clustering-based dynamic ensemble selection over a pool of shallow decision
//! trees, with a compact binary model format and a fixed-memory interpreter.

#![forbid(unsafe_code)]

pub mod cluster;
pub mod data;
pub mod error;
pub mod experiment;
pub mod seed;
pub mod selection;
pub mod synthetic;
pub mod tinyformat;
pub mod trees;

pub use cluster::{fit_kmeans, KMeansModel, KMeansParams};
pub use data::{Dataset, Matrix, Standardizer};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Method, ResultTable};
pub use selection::{CompetenceModel, Dsel, SelectionResult};
pub use tinyformat::{TinyEngine, TinyModel};
pub use trees::{ClassifierPool, DecisionTree, PoolConfig, TreeNode};
