//! File formats, configuration and pipeline commands around
//! [`hairfit_core`].
//!
//! - [`mesh_io`]: OBJ and PLY meshes, PLY point and line sets.
//! - [`strands`]: `.hair` and native `STR1` strand files.
//! - [`raster`]: PGM/PNG images and `DPT1` depth grids.
//! - [`dumps`]: curvature, field, trace and metric artifacts.
//! - [`config`]: the TOML run configuration.
//! - [`pipeline`]: the `orient`, `render`, `fit`, `eval`, `voxelize` and
//!   `all` commands.

pub mod config;
pub mod dumps;
pub mod error;
pub mod mesh_io;
pub mod pipeline;
pub mod raster;
pub mod strands;

pub use config::RunConfig;
pub use error::{ConfigError, Error, FormatError, Result};
