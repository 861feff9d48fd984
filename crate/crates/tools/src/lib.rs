//! File formats, case directories, reports, SVG rendering and the `aop`
//! command line around the measurement engine in `aop-core`.

pub mod case;
pub mod cli;
pub mod error;
pub mod f32r;
pub mod pgm;
pub mod report;
pub mod svg;

pub use error::{FormatError, ToolError};
