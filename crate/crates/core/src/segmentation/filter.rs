use super::image::GrayImage;
use crate::error::{Error, Result};

/// Horizontal Sobel kernel, applied as a correlation (positive for
/// intensity increasing to the right).
pub const KGX: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];

/// Vertical Sobel kernel. With y pointing down, intensity increasing
/// downward gives a negative response.
pub const KGY: [[i32; 3]; 3] = [[1, 2, 1], [0, 0, 0], [-1, -2, -1]];

const GAUSS: [[u32; 3]; 3] = [[1, 2, 1], [2, 4, 2], [1, 2, 1]];

fn check_size(img: &GrayImage) -> Result<()> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::ImageTooSmall { width: img.width(), height: img.height(), min: 3 });
    }
    Ok(())
}

/// Binomial 3x3 smoothing with replicated borders, rounded to nearest.
pub fn gaussian_smooth_3x3(img: &GrayImage) -> Result<GrayImage> {
    check_size(img)?;
    let (w, h) = (img.width() as isize, img.height() as isize);
    Ok(GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let mut acc = 0u32;
        for (ky, row) in GAUSS.iter().enumerate() {
            for (kx, &k) in row.iter().enumerate() {
                let sx = (x + kx as isize - 1).clamp(0, w - 1);
                let sy = (y + ky as isize - 1).clamp(0, h - 1);
                acc += k * img.clamped(sx, sy) as u32;
            }
        }
        ((acc + 8) / 16) as u8
    }))
}

/// Per-pixel Sobel responses.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<i32>,
    pub gy: Vec<i32>,
    /// L2 magnitude.
    pub magnitude: Vec<f64>,
}

/// Correlates the image with [`KGX`] and [`KGY`] using replicated borders.
pub fn sobel_gradients(img: &GrayImage) -> Result<Gradients> {
    check_size(img)?;
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut sx = 0i32;
            let mut sy = 0i32;
            for ky in 0..3 {
                for kx in 0..3 {
                    let v = img.clamped(x as isize + kx as isize - 1, y as isize + ky as isize - 1) as i32;
                    sx += KGX[ky][kx] * v;
                    sy += KGY[ky][kx] * v;
                }
            }
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
        }
    }
    let magnitude = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| ((a as f64).powi(2) + (b as f64).powi(2)).sqrt())
        .collect();
    Ok(Gradients { width: w, height: h, gx, gy, magnitude })
}
