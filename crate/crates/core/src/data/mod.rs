//! Schemas, CSV ingestion, discretization, encoding and splitting.

mod csv_io;
mod discretize;
mod encode;
mod schema;

pub use csv_io::{format_value, ingest_csv, ingest_reader, write_records, write_records_file, Ingested, ID_COLUMN};
pub use discretize::{discretize, one_hot, quantile_edges, QuantileEdges};
pub use encode::{
    argmax, decode_record, encode, sample_category, split_indices, split_train_val, values_for, Block, BlockKind,
    DecodeMode, EncodedDataset, Layout,
};
pub use schema::{AttributeKind, AttributeSpec, NumericEncoding, Record, Role, Schema, Value};
