//! Taylor-collocation for first-kind Volterra integral equations, run in
//! CESTAC stochastic arithmetic so that the degree loop can stop by itself.

pub mod backend;
pub mod collocation;
pub mod controller;
pub mod dual;
pub mod examples;
pub mod expr;
pub mod output;
pub mod problem_file;
pub mod quadrature;
pub mod sa;

pub use backend::{Backend, Plain, ValueSummary};
pub use collocation::{GridMode, ProblemSpec, Segment, TaylorSolution};
pub use controller::{digit_agreement, run, RunOptions, RunReport, StopReason, StoppingRule};
pub use examples::builtin_example;
pub use output::{render, render_sweep, OutputFormat, SweepEntry};
pub use quadrature::{QuadConfig, Weight};
pub use sa::{SaConfig, SaContext, StochasticValue};
