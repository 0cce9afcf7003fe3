//! Survey ingestion, labelled point construction and feature tables.

mod negatives;
mod survey;
mod table;

pub use negatives::{chunk_candidates, generate_negatives, NegativeParams};
pub use survey::{
    load_survey, parse_chunks, parse_positives, select_positives, Category, Chunk, SurveyRecord,
    Variant,
};
pub use table::{
    extract_features, nearest_rank, split_by_longitude, ExtractStats, FeatureTable, LabeledPoint,
    LongitudeSplit,
};
