//! Worth estimation from pairwise listening tests, metric-human
//! correlation, and FAD stability studies over window step and
//! evaluation-set size.

mod correlation;
mod plackett_luce;
mod studies;
mod table2;

pub use correlation::{fractional_ranks, pearson, spearman};
pub use plackett_luce::{
    fit_plackett_luce, fit_plackett_luce_from_random_start, load_comparisons, log_likelihood, read_comparisons,
    FitStatus, Outcome, PairwiseComparison, WorthVector, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
pub use studies::{dispersion_study, step_length_study, DispersionReport, DispersionRow, StepRow};
pub use table2::{table2, table2_correlations, Table2Row, TABLE2_CSV};
