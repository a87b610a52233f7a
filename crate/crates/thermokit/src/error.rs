use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed sequence container: {0}")]
    MalformedContainer(String),

    #[error("frame shape mismatch: frame {index} is {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    ShapeMismatch {
        index: usize,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },

    #[error("non-finite temperature value at frame {frame}, pixel ({row}, {col})")]
    NonFinite { frame: usize, row: usize, col: usize },

    #[error("mask conflict: {0}")]
    MaskConflict(String),

    #[error("heat matrix must be tall: {pixels} pixels < {frames} frames")]
    WideMatrix { pixels: usize, frames: usize },

    #[error("phantom spec invalid: {0}")]
    PhantomSpec(String),

    #[error("factorization config invalid: {0}")]
    FactorizeConfig(String),

    #[error("requested rank {p} exceeds {tau} frames")]
    RankTooLarge { p: usize, tau: usize },

    #[error("negative entries passed to a non-negative factorization method")]
    NegativeInput,

    #[error("l1 penalty thresholded a basis vector to all zeros")]
    AllZeroBasis,

    #[error("zero-norm matrix: relative error undefined")]
    ZeroNorm,

    #[error("covariance degenerate: {0}")]
    DegenerateCovariance(String),

    #[error("james-stein mean estimator requires p > 3, got {0}")]
    DimensionTooSmall(usize),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("embedding parameters invalid: {0}")]
    EmbeddingParams(String),

    #[error("roi too small: {got} pixels, need at least {need}")]
    RoiTooSmall { got: usize, need: usize },

    #[error("spectral embedding: {0}")]
    SpectralEmbed(String),

    #[error("knn graph is disconnected ({components} components); raise k")]
    DisconnectedGraph { components: usize },

    #[error("dataset invalid: {0}")]
    Dataset(String),

    #[error("classifier config invalid: {0}")]
    ClassifierConfig(String),

    #[error("pipeline config invalid: {0}")]
    PipelineConfig(String),

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
