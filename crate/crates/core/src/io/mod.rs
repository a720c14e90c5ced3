//! File formats: binary PGM/PPM images and ASCII PLY organized clouds.

mod ply;
mod pnm;

pub use ply::{read_ply, write_ply, PLY_ORGANIZED_COMMENT};
pub use pnm::{read_pnm, write_mask_pgm, write_pgm};
