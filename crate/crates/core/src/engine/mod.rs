//! The λ-SAGA iteration
//!
//! `X_{n+1} = X_n - gamma_n (grad f_U(X_n) - lambda (g_{n,U} - (1/N) sum_k g_{n,k}))`
//!
//! with `U` uniform on the components and `g_{n,k}` the gradient table.
//! `lambda = 0` is SGD and `lambda = 1` is SAGA.

mod diagnostics;
mod run;
mod state;
mod table;

pub use diagnostics::{
    conditional_step_expectation, conditional_step_expectation_p, diagnostics, higher_order_diagnostics,
    ConditionalExpectation, DiagnosticsSnapshot, HigherOrderSnapshot, ReferencePoint,
};
pub use run::{run, run_with_observer, trace_csv_row, Initialization, RunOptions, RunTrace, TRACE_CSV_HEADER};
pub use state::{init_state, lambda_saga_step, OptimizerState, SamplingStream};
pub use table::GradientTable;
