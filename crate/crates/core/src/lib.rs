//! Simulation library for response-adaptive randomized trials with multiple
//! active arms against a shared placebo: randomization engines, final-analysis
//! test statistics, multiplicity adjustment, Monte Carlo operating
//! characteristics, and numerical checks of the supporting theory.

pub mod design;
pub mod error;
pub mod monte_carlo;
pub mod multiplicity;
pub mod numerics;
pub mod randomization;
pub mod statistics;
pub mod verification;

pub use design::{
    AnalysisSpec, DbcdTarget, DesignConfig, EndpointSpec, Multiplicity, RabrMode,
    RandomizationSpec, TestKind, TrialState,
};
pub use error::{Error, Result};
pub use monte_carlo::{rank_arms_for_report, run_oc, simulate_trial, OCReport, RngStream, TrialResult};
pub use multiplicity::AdjustedResult;
pub use statistics::{ControlArm, PairwiseTestResult, StageSplit};
pub use verification::{
    lemma1_monotonicity_check, lemma1_q, lemma1_q_mc_oracle, theorem1_mc_oracle,
    theorem1_rejection_bound, theorem3_rejection_bound, w1_ordering_check, w1_ordering_sweep,
    BoundReport, Lemma1Query, McEstimate, MonotonicityReport, OrderingSweepReport, Theorem3Report,
    TheoremQuery,
};
