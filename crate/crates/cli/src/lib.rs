//! Experiment runners behind the `freqnet` command line: convergence of
//! finite-domain estimates to compiled limits, uniform-convergence parameter
//! sweeps, cross-size transfer learning, and the closed-form count-based
//! regression mismatch.

pub mod experiments;

pub use experiments::{
    compile_any, convergence_csv, run_convergence, run_rlr_mismatch, run_transfer,
    run_uniform_sweep, sweep_csv, ConvergenceRow, ExperimentError, ExperimentSpec,
    RlrMismatchReport, SweepPoint, SweepReport, TransferReport,
};
