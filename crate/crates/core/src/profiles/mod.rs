//! Candidate-profile schema, constraint utilities, normalization, datasets
//! and the synthetic data generator.

mod dataset;
mod generator;
mod io;
mod schema;

pub use dataset::{split, Dataset};
pub use generator::{generate_dataset, generate_with_truth, Generated, GeneratorConfig};
pub use io::{
    load_csv, parse_csv, parse_profile_json, profile_from_map, profile_to_map, save_csv,
    LABEL_COLUMN,
};
pub use schema::{
    default_schema, FeatureKind, FeatureSpec, NormStats, NormalizedProfile, ProfileSchema,
    RawProfile, SCHEMA_FORMAT_VERSION,
};
