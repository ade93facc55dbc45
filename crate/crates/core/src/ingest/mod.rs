//! Record parsing, graph construction, and literal encoding.

mod attributes;
mod build;
mod numeric;
mod records;
mod text;

pub use attributes::{fit_numeric_on_records, AttributeVectors};
pub use build::{build_kg, MISSING_NAME};
pub use numeric::{FieldRange, NumericEncoder, AGE_SLOT, DEFAULT_NUMERIC_WIDTH, WEIGHT_SLOT};
pub use records::{parse_records, write_records, AgeGroup, EmrRecord, ParseReport, RecordFormat, RowError, FIELDS};
pub use text::{char_ngrams, fnv1a64, TextEmbedder, DEFAULT_TEXT_WIDTH, NUM_BUCKETS};
