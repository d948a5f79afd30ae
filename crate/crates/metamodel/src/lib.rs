//! Symbolic meta-modeling over finite environments.
//!
//! The core idea: keep every dataset paired with a model whose extension
//! over the observed environment is exactly that dataset, then treat the
//! pairings as the atoms of a boolean algebra that can be evaluated in two
//! interchangeable domains, one over member sets and one over model logic.
//! On top of that sit a ranked combinatorial search for expressions that
//! explain a target set, two ready-made domains (binary lattice patterns
//! and divisibility over a range of integers), a kernel-density layer that
//! extends the same constructions to noisy point data, and network
//! analytics over the pairing structure.
//!
//! Quick tour:
//!
//! * [`sets`]: element identity, finite datasets, exact Jaccard similarity.
//! * [`expr`]: the 16-operation catalog, dual expression trees, the DSL.
//! * [`framework`]: observed elements, base models, bijective pairings.
//! * [`search`]: candidate enumeration, ranked matching, equation solving.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod framework;
pub mod lattice;
pub mod numbers;
pub mod search;
pub mod sets;
pub mod stochastic;

pub use analytics::{
    connection_stats, export_bipartite, hierarchy_tree, malleability, perturbation_malleability,
    BipartiteGraph, ChangeOp, ConnectionStats, PerturbationSpec, SimpleGraph,
};
pub use error::{Error, Result};
pub use expr::{dualize, dualize_inverse, eval_set, extension, parse, satisfies, ModelExpr, SetExpr};
pub use framework::{BaseModel, FeatureDef, FeatureKind, FeatureValue, FeatureVector, Framework};
pub use search::{solve_data_driven, solve_equation, solve_model_driven, SearchConfig};
pub use sets::{jaccard, Dataset, ElementId, Ratio};
pub use stochastic::{
    bayes_decision_map, build_stochastic_framework, convergence_check, kde, membership_report,
    region_ops, silverman_bandwidth, stochastic_lambda, support_region, union_density, Density,
    FeatureGrid, StochasticConfig, StochasticFramework, SupportRegion,
};
