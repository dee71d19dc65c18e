use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    // activation files
    #[error("bad magic: expected \"NACT\"")]
    BadMagic,
    #[error("unsupported NACT version {0}")]
    UnsupportedVersion(u32),
    #[error("payload size mismatch: header promises {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },
    #[error("non-finite activation value at element offset {offset}")]
    NonFiniteValue { offset: usize },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    // label files
    #[error("malformed line {line}")]
    MalformedLine { line: usize },
    #[error("label file contains no rows")]
    EmptyDataset,
    #[error("invalid split definition: {0}")]
    InvalidSplit(String),

    // slicing
    #[error("layer {layer} out of range (model has {layers} layers)")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error("neuron {neuron} out of range (model has {neurons} neurons)")]
    NeuronOutOfRange { neuron: usize, neurons: usize },
    #[error("duplicate neuron {0} in feature selection")]
    DuplicateNeuron(usize),

    // numerics
    #[error("too few rows: need at least 2, got {rows}")]
    TooFewRows { rows: usize },
    #[error("row count mismatch: {left} vs {right}")]
    RowMismatch { left: usize, right: usize },
    #[error("degenerate input ({0}): zero variance after centering")]
    DegenerateInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // probes
    #[error("split '{0}' is empty")]
    EmptySplit(String),
    #[error("training split contains a single class")]
    SingleClassTrain,
    #[error("unknown split '{0}'")]
    UnknownSplit(String),
    #[error("label '{0}' is not a numeric regression target")]
    InvalidTarget(String),

    // analytic failures
    #[error(
        "no schedule size reaches {required:.4} of oracle accuracy (best retention {best:.4})"
    )]
    NoSatisfyingSet { required: f64, best: f64 },
    #[error("no layer reaches {required:.4} of oracle accuracy")]
    NoLayerSatisfies { required: f64 },

    #[error("threshold {threshold}: {source}")]
    AtThreshold { threshold: f64, source: Box<Error> },
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// True for failures of the analysis itself (no subset or layer met the
    /// requested threshold) as opposed to bad data or I/O.
    pub fn is_analytic(&self) -> bool {
        match self {
            Error::NoSatisfyingSet { .. } | Error::NoLayerSatisfies { .. } => true,
            Error::AtThreshold { source, .. } | Error::Stage { source, .. } => source.is_analytic(),
            _ => false,
        }
    }
}
