use std::collections::VecDeque;

use super::filter::{sobel_gradients, Gradients};
use super::image::{Bitmap, GrayImage};

pub const DEFAULT_CANNY_SIGMA: f64 = 0.33;

// tan(22.5°) and tan(67.5°)
const TAN_22_5: f64 = 0.414_213_562_373_095_1;
const TAN_67_5: f64 = 2.414_213_562_373_095;

/// Lower median of the intensities.
pub fn median_intensity(img: &GrayImage) -> u8 {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let target = img.data().len().div_ceil(2);
    let mut seen = 0;
    for (v, &count) in hist.iter().enumerate() {
        seen += count;
        if seen >= target {
            return v as u8;
        }
    }
    0
}

/// Canny with hysteresis thresholds `(1 ∓ sigma) · median`, clamped to [0, 255].
///
/// The input is expected to be smoothed already; no blur is applied here.
pub fn auto_canny(img: &GrayImage, sigma: f64) -> Bitmap {
    let m = median_intensity(img) as f64;
    let lower = ((1.0 - sigma) * m).max(0.0);
    let upper = ((1.0 + sigma) * m).min(255.0);
    canny(img, lower, upper)
}

/// Sobel gradients, non-maximum suppression along the quantised gradient
/// direction, then hysteresis over 8-connected neighbours.
pub fn canny(img: &GrayImage, lower: f64, upper: f64) -> Bitmap {
    let (w, h) = (img.width(), img.height());
    let Ok(grad) = sobel_gradients(img) else {
        return Bitmap::new(w, h);
    };
    let thin = non_maximum_suppression(&grad);

    let mut edges = Bitmap::new(w, h);
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m > 0.0 && m >= upper {
            edges.set(i % w, i / w, true);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let j = ny * w + nx;
                if !edges.get(nx, ny) && thin[j] > 0.0 && thin[j] >= lower {
                    edges.set(nx, ny, true);
                    queue.push_back(j);
                }
            }
        }
    }
    edges
}

/// Magnitudes that survive suppression; everything else is zero. Ties keep
/// the pixel on the negative side of the gradient direction so a symmetric
/// step yields a single-pixel chain.
fn non_maximum_suppression(g: &Gradients) -> Vec<f64> {
    let (w, h) = (g.width as isize, g.height as isize);
    let mag = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            g.magnitude[(y * w + x) as usize]
        }
    };
    let mut out = vec![0.0; g.magnitude.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = g.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let (gx, gy) = (g.gx[i] as f64, g.gy[i] as f64);
            let (ax, ay) = (gx.abs(), gy.abs());
            let (before, after) = if ay <= ax * TAN_22_5 {
                (mag(x - 1, y), mag(x + 1, y))
            } else if ay >= ax * TAN_67_5 {
                (mag(x, y - 1), mag(x, y + 1))
            } else if (gx > 0.0) == (gy > 0.0) {
                // gy > 0 points up the image
                (mag(x - 1, y + 1), mag(x + 1, y - 1))
            } else {
                (mag(x - 1, y - 1), mag(x + 1, y + 1))
            };
            if m > before && m >= after {
                out[i] = m;
            }
        }
    }
    out
}
