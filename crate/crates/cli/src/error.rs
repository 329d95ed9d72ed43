use std::fmt;

use climakit::dataset::DatasetError;
use climakit::pipeline::PipelineError;
use climakit::placer::PlacerError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_BACKEND: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(EXIT_DATA, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn dataset_code(e: &DatasetError) -> i32 {
    match e {
        DatasetError::QuotaSum { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn placer_code(e: &PlacerError) -> i32 {
    match e {
        PlacerError::InvalidConfig(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Backend { .. } => EXIT_BACKEND,
            PipelineError::Placer(p) => placer_code(p),
            PipelineError::Dataset(d) => dataset_code(d),
            _ => EXIT_DATA,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        Self::new(dataset_code(&e), e.to_string())
    }
}

impl From<PlacerError> for CliError {
    fn from(e: PlacerError) -> Self {
        Self::new(placer_code(&e), e.to_string())
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::data(e.to_string())
            }
        }
    )*};
}

data_error!(climakit::compositor::CompositorError, climakit::metrics::MetricError, climakit::scene::SceneError);
