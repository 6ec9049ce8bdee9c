//! Strand-based hair reconstruction from colorless triangle-mesh scans.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every algorithmic
//! stage of the pipeline; file formats, configuration and the command line
//! live in the `hairfit` companion crate.
//!
//! Stages, in pipeline order:
//!
//! - [`mesh`]: triangle meshes, cleaning, normals, k-rings and fixtures.
//! - [`curvature`]: per-vertex cubic jets, principal curvatures and
//!   extremality coefficients.
//! - [`crest`]: crest-line tracing and cyclideness filtering.
//! - [`orient3d`]: orientation fields from crest lines.
//! - [`render`] and [`orient2d`]: shading renders, edge skeletons, longest
//!   pixel paths and their lift back into 3D.
//! - [`udf`]: exact unsigned distance to the hair surface.
//! - [`strand`]: scalp maps, roots and strand initialization.
//! - [`fit`]: losses, the denoising prior and the optimizer.
//! - [`eval`]: strand voxelization and precision/recall metrics.
//!
//! All lengths are millimeters.

#![no_std]

extern crate alloc;
#[cfg(feature = "parallel")]
extern crate std;

pub mod crest;
pub mod curvature;
pub mod eval;
pub mod fit;
pub mod geom;
pub mod image;
pub mod linalg;
pub mod mesh;
pub mod orient2d;
pub mod orient3d;
pub mod render;
pub mod rng;
pub mod spatial;
pub mod strand;
pub mod udf;

mod par;

pub use geom::{Aabb, Mat3, Vec3};
pub use mesh::TriMesh;
