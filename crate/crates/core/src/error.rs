use alloc::string::String;
use core::fmt;

use crate::raster::Class;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every module of the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Structurally invalid input: wrong extent, non-finite value, bad parameter.
    InvalidInput(String),
    /// The requested class has no pixels in the mask.
    MissingStructure(Class),
    /// Not enough points for an ellipse fit.
    InsufficientPoints { needed: usize, got: usize },
    /// The weighted scatter is rank-deficient or the conic is not an ellipse.
    DegenerateFit,
    /// The PS pixel cloud has no dominant direction.
    DegenerateAxis,
    /// Tangents were requested from a point inside or on the ellipse.
    PointNotExterior,
    /// Nonpositive side length handed to the law of cosines.
    InvalidTriangle,
    /// Angles are only spacing-invariant for square pixels.
    AnisotropicSpacing,
    /// A surface-distance computation found no boundary on one side.
    EmptyStructure,
    /// A phantom description violates its geometric invariants.
    InvalidSpec(String),
}

impl Error {
    /// Short machine-readable identifier, used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::MissingStructure(_) => "MissingStructure",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::DegenerateFit => "DegenerateFit",
            Error::DegenerateAxis => "DegenerateAxis",
            Error::PointNotExterior => "PointNotExterior",
            Error::InvalidTriangle => "InvalidTriangle",
            Error::AnisotropicSpacing => "AnisotropicSpacing",
            Error::EmptyStructure => "EmptyStructure",
            Error::InvalidSpec(_) => "InvalidSpec",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::MissingStructure(class) => write!(f, "no {} pixels in mask", class.name()),
            Error::InsufficientPoints { needed, got } => {
                write!(f, "insufficient points: need {needed}, got {got}")
            }
            Error::DegenerateFit => write!(f, "degenerate ellipse fit"),
            Error::DegenerateAxis => write!(f, "degenerate pubic symphysis axis"),
            Error::PointNotExterior => write!(f, "point is not outside the ellipse"),
            Error::InvalidTriangle => write!(f, "invalid triangle side lengths"),
            Error::AnisotropicSpacing => write!(f, "anisotropic pixel spacing"),
            Error::EmptyStructure => write!(f, "empty structure"),
            Error::InvalidSpec(msg) => write!(f, "invalid phantom spec: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

/// Pipeline stage at which `compute_aop` failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    Spacing,
    LargestComponent,
    BoundaryPoints,
    WeightedBoundary,
    FitEllipse,
    PsAxis,
    TangentPoints,
    AopFromSides,
    AopConfidence,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Spacing => "spacing",
            Stage::LargestComponent => "largest_component",
            Stage::BoundaryPoints => "boundary_points",
            Stage::WeightedBoundary => "weighted_boundary",
            Stage::FitEllipse => "fit_ellipse",
            Stage::PsAxis => "ps_axis",
            Stage::TangentPoints => "tangent_points",
            Stage::AopFromSides => "aop_from_sides",
            Stage::AopConfidence => "aop_confidence",
        }
    }
}

/// An [`Error`] tagged with the pipeline stage that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    pub fn new(stage: Stage, error: Error) -> Self {
        Self { stage, error }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage.name(), self.error)
    }
}

impl core::error::Error for StageError {}

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> core::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> core::result::Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, e))
    }
}
