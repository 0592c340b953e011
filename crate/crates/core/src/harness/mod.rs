//! Configuration, sweeps, order fitting and reports.

mod case;
mod config;
mod fit;
mod study;
pub mod suites;
mod sweep;

pub use case::{make_reference, run_case, CaseResult, CaseSpec, CaseSummary};
pub use config::{
    Config, GasSection, GridSection, OutputSection, PowerRule, ReferenceSection, SweepSection,
    ViscositySection, DEFAULT_EPS_LIST,
};
pub use fit::{fit_order, OrderFit};
pub use study::{
    energy_dt_study, slack_dt_study, spatial_order_study, DtStudy, LedgerSeries, Manufactured,
    SlackStudy, SpatialStudy,
};
pub use sweep::{
    check_conditional, render_report, run_sweep, sweep_slopes, write_sweep, SweepMetadata,
    SweepResult, SweepSlopes, Thresholds, Verdict, VerdictRecord,
};
