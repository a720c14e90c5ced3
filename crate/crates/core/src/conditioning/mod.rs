//! Point cloud conditioning: spatial index, downsampling, outlier removal,
//! surface resampling and difference-of-normals edge removal.

mod filters;
mod index;
mod mls;
mod normals;

pub use filters::{statistical_outlier_removal, voxel_grid_downsample};
pub use index::{Neighbor, NeighborIndex};
pub use mls::mls_resample;
pub use normals::{difference_of_normals, don_filter, estimate_normal, NormalField};
