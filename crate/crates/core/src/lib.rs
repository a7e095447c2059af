//! SOM-discretized rough-set rule induction for back analysis of
//! forward-model parameter studies.
//!
//! The flow is: load a table of forward-model runs ([`table`]), quantize each
//! attribute into ordinal granules with a 1-D Kohonen map ([`som`]), induce
//! constrained decision rules on the granules ([`rules`]) inside the
//! close-open iteration ([`pipeline`]), then match a monitored response
//! against the rules to recover parameter ranges. [`rough`] provides the
//! rough-set machinery and [`surrogate`] a toy forward model for
//! end-to-end experiments.

pub mod corpus;
pub mod error;
pub mod pipeline;
pub mod rough;
pub mod rules;
pub mod som;
pub mod surrogate;
pub mod table;

pub use error::{Error, Result};
