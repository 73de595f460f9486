use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("failed to read phantom file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("phantom schema error: {0}")]
    Parse(String),
    #[error("phantom invariant violated at `{path}`: {reason}")]
    Invariant { path: String, reason: String },
    #[error("query ({x}, {y}) mm is outside the workspace")]
    OutOfBounds { x: f64, y: f64 },
    #[error("membrane boundary is empty")]
    EmptyBoundary,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("non-finite torque command {0:?}")]
    NonFiniteTorque([f64; 3]),
    #[error("invalid plant parameters: {0}")]
    InvalidPlant(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ControlError {
    #[error("surface normal must be a unit vector (norm {0})")]
    NonUnitNormal(f64),
    #[error("mean contact force too small to define a surface normal")]
    UndefinedNormal,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimationError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("position cloud spread {0} mm is too small to fit a direction")]
    DegenerateCloud(f64),
    #[error("depth spread {0} mm is too small for a stiffness fit")]
    InsufficientSpread(f64),
    #[error("window contains samples without contact")]
    ContactLost,
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no stiffness samples")]
    NoSamples,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScanError {
    #[error("prominence coincides with the sternoclavicular midpoint")]
    DegenerateLine,
    #[error("scan line leaves the fixture box at ({0}, {1})")]
    OutsideFixture(f64, f64),
    #[error("profile has {0} samples, at least 3 required")]
    ProfileTooShort(usize),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("each group needs at least 2 samples (got {0} and {1})")]
    TooFewSamples(usize, usize),
    #[error("both groups have zero variance")]
    ZeroVariance,
    #[error("no records")]
    Empty,
    #[error("ellipse axes must be positive")]
    InvalidSize,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trial exceeded its time budget")]
    Timeout,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
