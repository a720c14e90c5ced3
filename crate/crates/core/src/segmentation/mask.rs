use serde::{Deserialize, Serialize};

use super::contour::Contour;
use super::image::{Bitmap, Rect};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskRole {
    Child,
    Parent,
}

impl MaskRole {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskRole::Child => "child",
            MaskRole::Parent => "parent",
        }
    }
}

/// Which masks a detection round emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Nested (child) contours only, picked first.
    ChildFirst,
    /// Everything else, once the children are gone.
    ParentAfter,
}

impl Phase {
    pub fn role(self) -> MaskRole {
        match self {
            Phase::ChildFirst => MaskRole::Child,
            Phase::ParentAfter => MaskRole::Parent,
        }
    }
}

/// Per-box bitmap: set bits are the box surface, everything else zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub bits: Bitmap,
    pub role: MaskRole,
    /// Index of the contour the mask was generated from.
    pub source: usize,
}

impl BinaryMask {
    pub fn width(&self) -> usize {
        self.bits.width()
    }

    pub fn height(&self) -> usize {
        self.bits.height()
    }

    pub fn count(&self) -> usize {
        self.bits.count()
    }

    /// Copies the mask into a larger frame at `(offset_x, offset_y)`, e.g.
    /// from ROI coordinates back to the full camera frame.
    pub fn embed(&self, offset_x: usize, offset_y: usize, width: usize, height: usize) -> BinaryMask {
        let mut bits = Bitmap::new(width, height);
        for y in 0..self.height() {
            for x in 0..self.width() {
                let (fx, fy) = (x + offset_x, y + offset_y);
                if self.bits.get(x, y) && fx < width && fy < height {
                    bits.set(fx, fy, true);
                }
            }
        }
        BinaryMask { bits, role: self.role, source: self.source }
    }

    /// Erodes the set region by `r` pixels (square structuring element),
    /// working only inside the mask's bounding box.
    pub fn eroded(&self, r: usize) -> BinaryMask {
        let Some(bb) = self.bits.bounding_box() else {
            return self.clone();
        };
        let pad = r + 1;
        let x0 = bb.x.saturating_sub(pad);
        let y0 = bb.y.saturating_sub(pad);
        let x1 = (bb.x + bb.width + pad).min(self.width());
        let y1 = (bb.y + bb.height + pad).min(self.height());
        let mut sub = Bitmap::new(x1 - x0, y1 - y0);
        for y in y0..y1 {
            for x in x0..x1 {
                sub.set(x - x0, y - y0, self.bits.get(x, y));
            }
        }
        let sub = sub.eroded(r);
        let mut bits = Bitmap::new(self.width(), self.height());
        for y in y0..y1 {
            for x in x0..x1 {
                if sub.get(x - x0, y - y0) {
                    bits.set(x, y, true);
                }
            }
        }
        BinaryMask { bits, role: self.role, source: self.source }
    }
}

/// Fills a closed polygon through pixel centres, boundary pixels included.
/// Interior pixels are exactly those for which the even–odd test passes.
pub fn rasterize_polygon(vertices: &[(i32, i32)], width: usize, height: usize) -> Bitmap {
    let mut out = Bitmap::new(width, height);
    let n = vertices.len();
    if n == 0 {
        return out;
    }
    let (ymin, ymax) = vertices.iter().fold((i32::MAX, i32::MIN), |(lo, hi), v| (lo.min(v.1), hi.max(v.1)));
    let mut crossings = Vec::new();
    for y in ymin.max(0)..=ymax.min(height as i32 - 1) {
        let yf = y as f64;
        crossings.clear();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = (vertices[i].0 as f64, vertices[i].1 as f64);
            let (xj, yj) = (vertices[j].0 as f64, vertices[j].1 as f64);
            if (yi > yf) != (yj > yf) {
                crossings.push((xj - xi) * (yf - yi) / (yj - yi) + xi);
            }
            j = i;
        }
        crossings.sort_by(f64::total_cmp);
        // pixel x is inside iff an odd number of crossings lie strictly right of it
        for pair in crossings.chunks(2) {
            if let [lo, hi] = *pair {
                let start = (lo.floor() as i64).max(0);
                let end = (hi.ceil() as i64 - 1).min(width as i64 - 1);
                for x in start..=end {
                    let xf = x as f64;
                    if xf >= lo && xf < hi {
                        out.set(x as usize, y as usize, true);
                    }
                }
            }
        }
    }
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        draw_segment(&mut out, a, b);
    }
    out
}

fn draw_segment(out: &mut Bitmap, a: (i32, i32), b: (i32, i32)) {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as usize) < out.width() && (y as usize) < out.height() {
            out.set(x as usize, y as usize, true);
        }
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Masks for one detection phase.
///
/// Child-first emits nested leaf contours (depth ≥ 1, no children of their
/// own). Parent-after emits every remaining contour; since children are
/// always deeper than their parents, ordering by depth guarantees a parent
/// comes after all of its children. Both lists are sorted by descending
/// depth, then descending area.
///
/// A child mask is its contour's filled polygon. A parent mask is its
/// filled polygon minus the filled polygons of its direct children, so
/// surfaces are never claimed twice.
pub fn generate_masks(contours: &[Contour], width: usize, height: usize, phase: Phase) -> Result<Vec<BinaryMask>> {
    let mut has_children = vec![false; contours.len()];
    for c in contours {
        if let Some(p) = c.parent {
            has_children[p] = true;
        }
    }
    let is_child = |i: usize| contours[i].depth >= 1 && !has_children[i];
    let mut selected: Vec<usize> = (0..contours.len())
        .filter(|&i| match phase {
            Phase::ChildFirst => is_child(i),
            Phase::ParentAfter => !is_child(i),
        })
        .collect();
    selected.sort_by(|&a, &b| {
        contours[b]
            .depth
            .cmp(&contours[a].depth)
            .then(contours[b].area.total_cmp(&contours[a].area))
            .then(a.cmp(&b))
    });

    Ok(selected
        .into_iter()
        .map(|i| {
            let mut bits = rasterize_polygon(&contours[i].vertices, width, height);
            for (j, c) in contours.iter().enumerate() {
                if c.parent == Some(i) && j != i {
                    subtract(&mut bits, &rasterize_polygon(&c.vertices, width, height), &c.bbox);
                }
            }
            BinaryMask { bits, role: phase.role(), source: i }
        })
        .collect())
}

fn subtract(bits: &mut Bitmap, other: &Bitmap, within: &Rect) {
    for y in within.y..(within.y + within.height).min(bits.height()) {
        for x in within.x..(within.x + within.width).min(bits.width()) {
            if other.get(x, y) {
                bits.set(x, y, false);
            }
        }
    }
}
