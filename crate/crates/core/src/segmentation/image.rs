use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{}x{} image needs {} bytes, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel with coordinates clamped into the image (edge replication).
    #[inline]
    pub(crate) fn clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect { x, y, width, height }
    }
}

/// Crops the bin region of interest. Everything downstream works in ROI
/// coordinates.
pub fn extract_roi(img: &GrayImage, rect: Rect) -> Result<GrayImage> {
    if rect.width == 0
        || rect.height == 0
        || rect.x + rect.width > img.width
        || rect.y + rect.height > img.height
    {
        return Err(Error::OutOfBounds {
            x: rect.x,
            y: rect.y,
            width: rect.width,
            height: rect.height,
            image_width: img.width,
            image_height: img.height,
        });
    }
    let mut data = Vec::with_capacity(rect.width * rect.height);
    for y in rect.y..rect.y + rect.height {
        let start = y * img.width + rect.x;
        data.extend_from_slice(&img.data[start..start + rect.width]);
    }
    Ok(GrayImage { width: rect.width, height: rect.height, data })
}

/// Plain boolean raster used for edge maps and mask bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize) -> Self {
        Bitmap { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{}x{} bitmap needs {} bits, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(Bitmap { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Bounding box of the set bits, `None` when empty.
    pub fn bounding_box(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            if let Some(first) = row.iter().position(|&b| b) {
                let last = row.iter().rposition(|&b| b).unwrap_or(first);
                x0 = x0.min(first);
                x1 = x1.max(last);
                y0 = y0.min(y);
                y1 = y;
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// Binary dilation with a (2r+1)x(2r+1) square.
    pub fn dilated(&self, r: usize) -> Bitmap {
        self.morph(r, true)
    }

    /// Binary erosion with a (2r+1)x(2r+1) square; pixels outside the raster count as unset.
    pub fn eroded(&self, r: usize) -> Bitmap {
        self.morph(r, false)
    }

    // Separable running-window min/max.
    fn morph(&self, r: usize, dilate: bool) -> Bitmap {
        if r == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![false; w * h];
        let window = 2 * r + 1;
        let horizontal = |src: &[bool], dst: &mut [bool]| {
            for y in 0..h {
                let row = &src[y * w..(y + 1) * w];
                let out = &mut dst[y * w..(y + 1) * w];
                // prefix count of set bits
                let mut prefix = vec![0usize; w + 1];
                for x in 0..w {
                    prefix[x + 1] = prefix[x] + row[x] as usize;
                }
                for (x, o) in out.iter_mut().enumerate() {
                    let lo = x.saturating_sub(r);
                    let hi = (x + r + 1).min(w);
                    let set = prefix[hi] - prefix[lo];
                    *o = if dilate { set > 0 } else { set == window };
                }
            }
        };
        horizontal(&self.bits, &mut tmp);
        let mut out = vec![false; w * h];
        for x in 0..w {
            let mut prefix = vec![0usize; h + 1];
            for y in 0..h {
                prefix[y + 1] = prefix[y] + tmp[y * w + x] as usize;
            }
            for y in 0..h {
                let lo = y.saturating_sub(r);
                let hi = (y + r + 1).min(h);
                let set = prefix[hi] - prefix[lo];
                out[y * w + x] = if dilate { set > 0 } else { set == window };
            }
        }
        Bitmap { width: w, height: h, bits: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image() -> GrayImage {
        GrayImage::from_fn(100, 100, |x, y| ((x + 2 * y) % 256) as u8)
    }

    #[test]
    fn full_frame_roi_is_identity() {
        let img = gradient_image();
        assert_eq!(extract_roi(&img, Rect::new(0, 0, 100, 100)).unwrap(), img);
    }

    #[test]
    fn roi_crops() {
        let img = gradient_image();
        let roi = extract_roi(&img, Rect::new(10, 10, 50, 50)).unwrap();
        assert_eq!((roi.width(), roi.height()), (50, 50));
        assert_eq!(roi.get(0, 0), img.get(10, 10));
        assert_eq!(roi.get(49, 49), img.get(59, 59));
    }

    #[test]
    fn roi_out_of_bounds() {
        let img = gradient_image();
        assert!(matches!(
            extract_roi(&img, Rect::new(60, 0, 50, 10)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn morphology() {
        let mut b = Bitmap::new(9, 9);
        b.set(4, 4, true);
        let d = b.dilated(1);
        assert_eq!(d.count(), 9);
        assert_eq!(d.eroded(1).count(), 1);
        assert_eq!(d.bounding_box(), Some(Rect::new(3, 3, 3, 3)));
        assert_eq!(Bitmap::new(3, 3).bounding_box(), None);
    }
}
