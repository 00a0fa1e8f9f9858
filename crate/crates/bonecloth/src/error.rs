//! Crate-wide error types.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("source vertex set is empty")]
    EmptySources,
    #[error("source index {index} out of range ({count} vertices)")]
    SourceOutOfRange { index: usize, count: usize },
    #[error("sample count {requested} exceeds point count {available}")]
    SampleCountExceedsPoints { requested: usize, available: usize },
    #[error("sample count must be at least 1")]
    ZeroSampleCount,
    #[error("seed index {index} out of range ({count} points)")]
    SeedOutOfRange { index: usize, count: usize },
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face count {faces} does not match uv record count {uvs}")]
    UvCountMismatch { faces: usize, uvs: usize },
    #[error("positions length {got} does not match vertex count {expected}")]
    PositionCountMismatch { got: usize, expected: usize },
    #[error("grid dimensions must be at least 1x1, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },
    #[error("grid {gh}x{gw}x{gc} does not match expected {eh}x{ew} atlas")]
    GridMismatch { gh: usize, gw: usize, gc: usize, eh: usize, ew: usize },
    #[error("capsule radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("pose has {got} joints, skeleton has {expected}")]
    PoseLengthMismatch { got: usize, expected: usize },
    #[error("joint transform count {got} does not match joint count {expected}")]
    TransformCountMismatch { got: usize, expected: usize },
    #[error("degenerate 6d rotation input{}", bone.map(|b| format!(" for bone {b}")).unwrap_or_default())]
    DegenerateRotation { bone: Option<usize> },
    #[error("weight matrix is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    WeightShapeMismatch { got_rows: usize, got_cols: usize, rows: usize, cols: usize },
    #[error("non-finite weight correction at row {row}")]
    NonFiniteCorrection { row: usize },
    #[error("blur scale sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("skeleton parents must be topologically sorted: joint {joint} has parent {parent}")]
    UnsortedParent { joint: usize, parent: usize },
    #[error("rest transform of joint {joint} is not rigid")]
    NonRigidRest { joint: usize },
}

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("non-finite acceleration at vertex {vertex}")]
    NonFiniteAcceleration { vertex: usize },
    #[error("zero rest length on edge ({a}, {b})")]
    ZeroRestLength { a: usize, b: usize },
    #[error("state has {got} vertices, expected {expected}")]
    StateSizeMismatch { got: usize, expected: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ParameterShape { name: String, got: Vec<usize>, expected: Vec<usize> },
    #[error("unexpected extra parameter {0}")]
    UnexpectedParameter(String),
    #[error("obj parse error at line {line}: {message}")]
    ObjParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
