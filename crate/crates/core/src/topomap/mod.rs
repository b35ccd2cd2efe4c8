//! Spectral head maps: projection, triangulation, Clough-Tocher
//! interpolation and tensor assembly.

mod clough_tocher;
pub mod delaunay;
mod file;
mod grid;
mod projection;

pub use clough_tocher::{CloughTocher, CloughTocherMesh};
pub use delaunay::Triangulation;
pub use file::{load_tensors, read_tensors, save_tensors, write_tensors, TENSOR_MAGIC, TENSOR_VERSION};
pub(crate) use file::{read_tensor_body, read_tensor_header, write_tensor_body, write_tensor_header};
pub use grid::{build_tensor, interpolate, GridFrame, TopoMap, TopoProjector};
pub use projection::{project, project_point, ProjectedLayout};

/// Delaunay triangulation of a projected layout.
pub fn triangulate(layout: &ProjectedLayout) -> crate::Result<Triangulation> {
    Triangulation::new(&layout.points)
}
