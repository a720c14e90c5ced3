//! Box segmentation on the RGB frame: bin ROI, 3x3 Gaussian smoothing,
//! Sobel gradients with auto-thresholded Canny, contour hierarchy, and
//! child-first / parent-after binary masks.

mod canny;
mod contour;
mod filter;
mod image;
mod mask;

pub use canny::{auto_canny, canny, median_intensity, DEFAULT_CANNY_SIGMA};
pub use contour::{find_contours, point_in_polygon, refine_contours, scaled_min_area, Contour, REFERENCE_MIN_AREA, REFERENCE_PIXELS};
pub use filter::{gaussian_smooth_3x3, sobel_gradients, Gradients, KGX, KGY};
pub use image::{extract_roi, Bitmap, GrayImage, Rect};
pub use mask::{generate_masks, rasterize_polygon, BinaryMask, MaskRole, Phase};
