//! Closed boundaries from an edge map, with parent/child nesting.
//!
//! Edges are dilated once with a 3x3 square to close single-pixel gaps.
//! Every 4-connected region of non-edge pixels that does not touch the
//! image border is an area fully enclosed by edges; its outer border is
//! traced with Suzuki–Abe border following and becomes one [`Contour`].
//! A region lying inside the hole of another region (a small box on top of
//! a larger one) is that region's child.
//!
//! Regions touching the border are treated as background. A box cut by the
//! ROI border therefore produces no contour.

use super::image::{Bitmap, Rect};

/// Area threshold at the reference resolution, in px².
pub const REFERENCE_MIN_AREA: f64 = 2500.0;
/// Pixel count of the reference 2K frame (2048x1536).
pub const REFERENCE_PIXELS: f64 = 2048.0 * 1536.0;

/// Minimum contour area for an image of `width`x`height` pixels.
pub fn scaled_min_area(width: usize, height: usize) -> f64 {
    REFERENCE_MIN_AREA * (width * height) as f64 / REFERENCE_PIXELS
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    /// Closed polygon through boundary pixel centres, `(x, y)`; the closing
    /// edge from the last vertex back to the first is implicit.
    pub vertices: Vec<(i32, i32)>,
    /// Shoelace area of `vertices`.
    pub area: f64,
    pub parent: Option<usize>,
    pub depth: usize,
    pub bbox: Rect,
}

impl Contour {
    fn new(vertices: Vec<(i32, i32)>) -> Contour {
        let vertices = compress(vertices);
        let area = shoelace(&vertices);
        let (mut x0, mut y0, mut x1, mut y1) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
        for &(x, y) in &vertices {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let bbox = Rect::new(x0 as usize, y0 as usize, (x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
        Contour { vertices, area, parent: None, depth: 0, bbox }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        point_in_polygon(&self.vertices, x, y)
    }
}

/// Traces enclosed regions of `edges` and links them into a hierarchy.
pub fn find_contours(edges: &Bitmap) -> Vec<Contour> {
    let (w, h) = (edges.width(), edges.height());
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let blocked = edges.dilated(1);
    let (labels, regions) = label_regions(&blocked);

    let mut contours: Vec<Contour> = regions
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.touches_border)
        .map(|(id, r)| Contour::new(trace_outer_border(&labels, w, h, id as u32 + 1, r.start)))
        .collect();
    link_hierarchy(&mut contours);
    contours
}

/// Drops contours smaller than `min_area` and re-links survivors to their
/// nearest surviving ancestor.
pub fn refine_contours(contours: &[Contour], min_area: f64) -> Vec<Contour> {
    let keep: Vec<bool> = contours.iter().map(|c| c.area >= min_area).collect();
    let mut new_index = vec![usize::MAX; contours.len()];
    let mut out = Vec::new();
    for (i, c) in contours.iter().enumerate() {
        if keep[i] {
            new_index[i] = out.len();
            out.push(c.clone());
        }
    }
    for (i, c) in contours.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        let mut parent = c.parent;
        while let Some(p) = parent {
            if keep[p] {
                break;
            }
            parent = contours[p].parent;
        }
        out[new_index[i]].parent = parent.map(|p| new_index[p]);
    }
    assign_depths(&mut out);
    out
}

struct Region {
    start: (usize, usize),
    touches_border: bool,
}

/// 4-connected labelling of unset pixels; label 0 marks set (edge) pixels.
fn label_regions(blocked: &Bitmap) -> (Vec<u32>, Vec<Region>) {
    let (w, h) = (blocked.width(), blocked.height());
    let mut labels = vec![0u32; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if blocked.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            let id = regions.len() as u32 + 1;
            let mut touches_border = false;
            labels[y * w + x] = id;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                if cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1 {
                    touches_border = true;
                }
                let mut visit = |nx: usize, ny: usize| {
                    let j = ny * w + nx;
                    if labels[j] == 0 && !blocked.get(nx, ny) {
                        labels[j] = id;
                        stack.push((nx, ny));
                    }
                };
                if cx > 0 {
                    visit(cx - 1, cy);
                }
                if cx + 1 < w {
                    visit(cx + 1, cy);
                }
                if cy > 0 {
                    visit(cx, cy - 1);
                }
                if cy + 1 < h {
                    visit(cx, cy + 1);
                }
            }
            // raster order guarantees (x, y) is the top-left-most pixel
            regions.push(Region { start: (x, y), touches_border });
        }
    }
    (labels, regions)
}

// Clockwise neighbour offsets in image coordinates (y down), starting east.
const NEIGHBORS: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn direction(from: (i32, i32), to: (i32, i32)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    NEIGHBORS.iter().position(|&n| n == d).expect("pixels are 8-adjacent")
}

/// Suzuki–Abe outer border following for the region `id`, starting at its
/// top-left-most pixel (whose west neighbour is outside the region).
fn trace_outer_border(labels: &[u32], w: usize, h: usize, id: u32, start: (usize, usize)) -> Vec<(i32, i32)> {
    let inside = |p: (i32, i32)| -> bool {
        p.0 >= 0 && p.1 >= 0 && (p.0 as usize) < w && (p.1 as usize) < h && labels[p.1 as usize * w + p.0 as usize] == id
    };
    let start = (start.0 as i32, start.1 as i32);
    let step = |p: (i32, i32), d: usize| (p.0 + NEIGHBORS[d].0, p.1 + NEIGHBORS[d].1);

    // clockwise search from the west neighbour
    let west = 4usize;
    let first = (0..8).map(|k| (west + k) % 8).map(|d| step(start, d)).find(|&p| inside(p));
    let Some(first) = first else {
        return vec![start];
    };

    let mut border = Vec::new();
    let (mut prev, mut cur) = (first, start);
    loop {
        // counter-clockwise search around `cur`, starting after `prev`
        let d0 = direction(cur, prev);
        let next = (1..=8)
            .map(|k| (d0 + 8 - k) % 8)
            .map(|d| step(cur, d))
            .find(|&p| inside(p))
            .expect("border pixel has a neighbour");
        border.push(cur);
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
    }
    border
}

/// Removes vertices lying on a straight run between their neighbours.
fn compress(v: Vec<(i32, i32)>) -> Vec<(i32, i32)> {
    if v.len() < 3 {
        return v;
    }
    let n = v.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = v[(i + n - 1) % n];
        let b = v[i];
        let c = v[(i + 1) % n];
        let cross = (b.0 - a.0) as i64 * (c.1 - b.1) as i64 - (b.1 - a.1) as i64 * (c.0 - b.0) as i64;
        let forward = (b.0 - a.0) as i64 * (c.0 - b.0) as i64 + (b.1 - a.1) as i64 * (c.1 - b.1) as i64;
        if cross != 0 || forward <= 0 {
            out.push(b);
        }
    }
    if out.is_empty() {
        out.push(v[0]);
    }
    out
}

fn shoelace(v: &[(i32, i32)]) -> f64 {
    let n = v.len();
    let mut acc = 0i64;
    for i in 0..n {
        let (x0, y0) = v[i];
        let (x1, y1) = v[(i + 1) % n];
        acc += x0 as i64 * y1 as i64 - x1 as i64 * y0 as i64;
    }
    (acc as f64).abs() / 2.0
}

/// Even–odd crossing test.
pub fn point_in_polygon(v: &[(i32, i32)], x: f64, y: f64) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (xi, yi) = (v[i].0 as f64, v[i].1 as f64);
        let (xj, yj) = (v[j].0 as f64, v[j].1 as f64);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn strictly_contains(outer: &Rect, inner: &Rect) -> bool {
    outer.x < inner.x
        && outer.y < inner.y
        && outer.x + outer.width > inner.x + inner.width
        && outer.y + outer.height > inner.y + inner.height
}

/// Parent = smallest contour whose box strictly contains ours and whose
/// polygon contains our first vertex. Regions are disjoint, so one vertex
/// decides containment for the whole region.
fn link_hierarchy(contours: &mut [Contour]) {
    let n = contours.len();
    for i in 0..n {
        let (px, py) = contours[i].vertices[0];
        let mut best: Option<usize> = None;
        for j in 0..n {
            if i == j || !strictly_contains(&contours[j].bbox, &contours[i].bbox) {
                continue;
            }
            if !contours[j].contains_point(px as f64, py as f64) {
                continue;
            }
            if best.is_none_or(|b| contours[j].area < contours[b].area) {
                best = Some(j);
            }
        }
        contours[i].parent = best;
    }
    assign_depths(contours);
}

fn assign_depths(contours: &mut [Contour]) {
    for i in 0..contours.len() {
        let mut depth = 0;
        let mut p = contours[i].parent;
        while let Some(j) = p {
            depth += 1;
            p = contours[j].parent;
            if depth > contours.len() {
                break;
            }
        }
        contours[i].depth = depth;
    }
}
