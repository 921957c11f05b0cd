//! CSV ingestion, categorical encoding, min-max normalization and
//! stratified splitting for UGRansome-format records.

mod distribution;
mod encode;
mod normalize;
mod raw;
mod schema;
mod split;
pub mod synthetic;
mod table;

pub use distribution::{class_counts, class_distribution, from_counts, ClassDistribution};
pub use encode::{encode_categoricals, VocabMap, VocabMode};
pub use normalize::{minmax_normalize, NormStats};
pub use raw::{parse_csv, parse_csv_reader, RawColumn, RawTable};
pub use schema::{ColumnKind, ColumnSpec, FeatureSchema, FEATURE_WIDTH, NUM_CLASSES};
pub use split::{stratified_split, stratified_split_indices, test_count, SplitIndices};
pub use table::ExampleTable;
