//! Approximation algorithms for capacitated k-supplier and k-center with
//! outliers.
//!
//! Open exactly `k` facilities, serve exactly `p` clients within each
//! facility's capacity, and minimise the largest client-facility distance.
//! [`solve_metric`] returns a solution within 25 times the optimum
//! (23 for uniform hard capacities, 13 for uniform soft ones), or reports
//! that no solution exists.
//!
//! ```
//! use capkc::{parse_instance, solve_metric, verify_solution, SolveOptions};
//!
//! let inst = parse_instance(r#"{
//!     "k": 1, "p": 2,
//!     "clients": ["a", "b"],
//!     "facilities": [{"id": "f", "cap": 2}],
//!     "metric": {"type": "matrix", "order": ["a", "b", "f"],
//!                "values": [[0, 2, 1], [2, 0, 1], [1, 1, 0]]}
//! }"#).unwrap();
//! let result = solve_metric(&inst, &SolveOptions::default()).unwrap();
//! let sol = result.solution.unwrap();
//! assert_eq!(sol.radius, 1.0);
//! assert!(verify_solution(&inst, &sol, sol.radius).is_valid());
//! ```

pub mod clustering;
pub mod error;
pub mod flow;
pub mod generators;
pub mod io;
pub mod model;
pub mod oracle;
pub mod relaxation;
pub mod rounding;
pub mod simplex;
pub mod skeleton;
pub mod thresholding;
pub mod transfer;
pub mod variants;

pub use error::{Error, Result};
pub use io::{instance_to_json, parse_instance, parse_solution, solution_to_json};
pub use model::{
    validate_metric, verify_solution, CapacityMode, GraphInstance, InstanceParts, MetricInstance,
    MetricParts, Mode, Solution,
};
pub use oracle::{exact_opt, OracleOptions, OracleResult};
pub use thresholding::{solve_metric, RunReport, SolveOptions, SolveResult};
pub use variants::Variant;

// mdbook cannot compile snippets against this crate, so each chapter is
// pulled in as a module doc and `cargo test --doc` runs its code blocks.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/transfers.md")]
    mod transfers {}
    #[doc = include_str!("../../../book/src/variants.md")]
    mod variants {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
