//! Two-sphere phaseless data sets and the recovery steps that run on them: cross terms
//! from superposed moduli, phase-difference cosines, the identity/conjugate dichotomy and
//! the radiation test that removes the conjugate branch.

pub mod branch;
pub mod dataset;
pub mod io;
pub mod recovery;

pub use branch::{
    classify_branch, classify_branch_with_tol, conjugate_discriminator, discriminator_grids, shell_dirichlet_solve,
    shell_traces, Branch, BranchReport, DiscriminatorGrids, DiscriminatorReport, Hypothesis, ShellExpansion,
    ShellTraces, Verdict, GROWTH_REJECT, TOL_MATCH,
};
pub use dataset::{
    acoustic_census, acoustic_dataset, acoustic_records, acoustic_tables, degenerate_channels, em_census, em_dataset,
    em_records, em_tables, synthesize_acoustic, synthesize_em,
    AcousticTables, Census, DatasetHeader, EmConfig, EmTables, GridSpec, Mode, PhaselessDataset, PointRef, Pol, Record,
};
pub use io::{read_jsonl, write_csv, write_jsonl};
pub use recovery::{
    em_recover_cos_delta, em_recover_real_cross, phase_differences, recover_cos_delta, recover_real_cross,
    PhaseDiffRecord,
};

/// Amplitude floor relative to the largest modulus in a data set.
pub const TOL_AMP_REL: f64 = 1e-10;
