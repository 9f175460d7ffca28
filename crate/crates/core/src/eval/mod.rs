//! Effect metrics, baseline estimators and the multi-realization
//! experiment runner.

mod baselines;
mod experiment;
mod metrics;
mod plot;
mod report;

pub use baselines::{fit_knn, fit_lr1, fit_lr2, Counterfactuals, Knn, LinearModel, Lr1, Lr2};
pub use experiment::{
    discriminator_means, fit_cegan, fit_cegan_lp, realization_seeds, run_experiment, run_sweep,
    CeganEstimator, DataSource, ExperimentSpec, RealizationSeeds, SweepAxis, SweepPoint, SweepReport,
};
pub(crate) use experiment::hex;
pub use metrics::{ate_error, pehe};
pub use plot::sweep_svg;
pub use report::{
    EvalReport, MethodOutcome, MethodId, RealizationRecord, SplitMetrics, Summary, REPORT_CSV_HEADER,
};
