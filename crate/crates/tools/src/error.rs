use std::fmt;
use std::io;
use std::path::PathBuf;

/// Malformed bytes in one of the raster file formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    /// Byte offset at which decoding failed.
    pub offset: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self { offset, message: message.into() }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at byte {})", self.message, self.offset)
    }
}

impl std::error::Error for FormatError {}

#[derive(Debug)]
pub enum ToolError {
    Io { path: PathBuf, source: io::Error },
    Format { path: PathBuf, source: FormatError },
    Json { path: PathBuf, source: serde_json::Error },
    Core(aop_core::Error),
    /// A flag value that parses but is not acceptable.
    Usage(String),
}

impl ToolError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        ToolError::Io { path: path.into(), source }
    }

    /// Short identifier used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            ToolError::Io { .. } => "Io",
            ToolError::Format { .. } => "Format",
            ToolError::Json { .. } => "Json",
            ToolError::Core(e) => e.kind(),
            ToolError::Usage(_) => "Usage",
        }
    }
}

impl fmt::Display for ToolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToolError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            ToolError::Format { path, source } => write!(f, "{}: {source}", path.display()),
            ToolError::Json { path, source } => write!(f, "{}: {source}", path.display()),
            ToolError::Core(e) => write!(f, "{e}"),
            ToolError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ToolError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ToolError::Io { source, .. } => Some(source),
            ToolError::Format { source, .. } => Some(source),
            ToolError::Json { source, .. } => Some(source),
            ToolError::Core(e) => Some(e),
            ToolError::Usage(_) => None,
        }
    }
}

impl From<aop_core::Error> for ToolError {
    fn from(e: aop_core::Error) -> Self {
        ToolError::Core(e)
    }
}
