//! Tabular data: ingestion, transforms, splits and synthetic generators.

mod csv_load;
mod dataset;
mod sampling;

pub use csv_load::{load_csv, load_schema, read_csv};
pub use dataset::{
    ColumnKind, ColumnSchema, ColumnTransform, Dataset, RawValue, SchemaFile, TransformKind,
};
pub use sampling::{leave_one_out_variants, split, synth_2d, SynthKind};
