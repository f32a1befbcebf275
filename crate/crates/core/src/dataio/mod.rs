//! Input/output formats and the datasets shipped with the crate.

pub mod embedded;
pub mod profiles;
pub mod records;
pub mod samples;
pub mod stream;

pub use embedded::EmbeddedDatasets;
pub use profiles::{builtin_profiles, load_codec_profiles, profiles_to_toml, PROFILE_PATH_ENV};
pub use records::{load_subjective_records, write_subjective_records};
pub use samples::load_samples;
pub use stream::{read_metric_stream, ErrorPolicy, MetricRecord, MetricStream};
