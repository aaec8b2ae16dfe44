//! Episode replay, the PI policy adapter and the parameter-study driver.

mod episode;
mod experiment;
mod pi_policy;
mod report;

pub use episode::{
    run_episode, run_episode_observed, ArrivalContext, DecisionSource, EpisodeResult, FirstFit,
    RejectAll, SimEvent, StepRecord,
};
pub use experiment::{
    derive_scenario, evaluate_bestfit, evaluate_pi, evaluate_ql, run_experiment,
    run_learning_study, run_scenario, Algorithm, CurveResult, CurveVariant, ExperimentConfig,
    ExperimentPreset, ExperimentReport, ParamRow, RunLabel, Study,
};
pub use pi_policy::PiPolicy;
pub use report::{
    compare_algorithms, write_csv, write_curve_csv, write_curves_csv, write_params_csv, DeltaRow,
    ResultRow, Summary, SummaryRow,
};
