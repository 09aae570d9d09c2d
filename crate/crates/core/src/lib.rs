//! Linearizability tests for planar d-webs and numerical construction of
//! flat coordinates for linearizable ones.

// `!(r <= tol)` is used on purpose so that NaN residuals fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The operator traits delegate to these named constructors.
#![allow(clippy::should_implement_trait)]

pub mod calculus;
pub mod corpus;
pub mod covariant;
pub mod expr;
pub mod invariants;
pub mod linearizer;
pub mod report;
pub mod sample;
