//! Fault tree analysis with reduced ordered binary decision diagrams.
//!
//! Static trees are translated to a BDD and analysed there: minimal cut
//! sets, unreliability at one or many time points, importance measures and
//! mean time to failure. Dynamic trees are split into independent modules;
//! dynamic modules are solved as continuous-time Markov chains and replaced
//! by tabulated basic events before the BDD step.
//!
//! ```
//! use ftkit::galileo;
//! use ftkit::{StaticAnalysis, TranslateOptions, VariableOrder, OrderingHeuristic};
//!
//! let model = galileo::parse(r#"
//!     toplevel "T";
//!     "T" and "a" "b";
//!     "a" lambda=1.0;
//!     "b" lambda=2.0;
//! "#).unwrap();
//! let order = VariableOrder::from_heuristic(&model.tree, OrderingHeuristic::Dfs);
//! let analysis = StaticAnalysis::new(&model.tree, &order, TranslateOptions::default()).unwrap();
//! let u = analysis.unreliability_at(1.0).unwrap();
//! assert!((u - (1.0 - (-1.0f64).exp()) * (1.0 - (-2.0f64).exp())).abs() < 1e-15);
//! ```

pub mod analysis;
pub mod bdd;
pub mod ctmc;
pub mod curve;
pub mod galileo;
pub mod model;
pub mod modular;
pub mod mttf;
pub mod ordering;
pub mod translate;

pub use analysis::{AnalysisError, ImportanceMeasure, StaticAnalysis, DEFAULT_CHUNK_SIZE};
pub use bdd::{BddError, BddManager, BddRef};
pub use ctmc::{build_ctmc, transient_failure_prob, Ctmc, CtmcError};
pub use curve::{uniform_times, CurveError, TimeCurve};
pub use galileo::{GalileoModel, ParseError};
pub use model::{Distribution, FaultTree, FaultTreeBuilder, NodeId, NodeType, SpareKind};
pub use modular::{analyze_dft, DftAnalyzer, DftOptions, DftResult, ModularError};
pub use mttf::{LimitParams, MttfMethod, SubstitutionParams};
pub use ordering::{OrderError, OrderingHeuristic, VariableOrder};
pub use translate::{TranslateError, TranslateOptions};
