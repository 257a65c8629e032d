//! Corpus statistics, attachment scoring and significance testing.

mod bounds;
mod scoring;
mod significance;

pub use bounds::{genre_bounds, selection_matrix, selection_table, GenreBound, GenreBounds};
pub use scoring::{las_uas, sentence_scores, AttachmentScore, DeprelMatch, SentenceScore};
pub use significance::{
    aggregate_seeds, bonferroni, mean_std, paired_sign_test, sign_test_from_differences,
    SeedSummary, SignificanceResult,
};
