//! Weak-annotation geometry: contour tracing, polygon simplification,
//! rasterization, bounded-polygon annotations, region partitions,
//! scribbles and boxes.
//!
//! Coordinate conventions: pixel (x, y) is the unit square
//! [x, x+1) × [y, y+1) with center (x+0.5, y+0.5). Traced contours run
//! along pixel edges, so their vertices are integer corner coordinates in
//! [0, W] × [0, H]. A pixel belongs to a polygon iff its center is inside
//! under the even-odd rule; centers exactly on an edge count as inside.
//! Because corners are integers and centers are half-integers, rasterizing
//! a traced contour reproduces the source mask exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{
    self, dilate_erode, fill_holes, largest_component, label_components, BinaryMask,
};

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pt {
    pub x: f64,
    pub y: f64,
}

impl Pt {
    pub fn new(x: f64, y: f64) -> Self {
        Pt { x, y }
    }
}

/// A closed polygon. Consecutive vertices are distinct; the closing edge
/// from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Pt>,
}

impl Polygon {
    pub fn new(vertices: Vec<Pt>) -> Self {
        Polygon { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Self {
        Polygon {
            vertices: coords.iter().map(|c| Pt::new(c[0], c[1])).collect(),
        }
    }

    pub fn to_coords(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|p| [p.x, p.y]).collect()
    }

    fn centroid(&self) -> Pt {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Pt::new(sx / n, sy / n)
    }

    /// Vertices in doubled integer coordinates (half-pixel grid).
    fn doubled(&self) -> Vec<(i64, i64)> {
        self.vertices
            .iter()
            .map(|p| ((2.0 * p.x).round() as i64, (2.0 * p.y).round() as i64))
            .collect()
    }

    /// True when no two non-adjacent edges intersect or touch.
    pub fn is_simple(&self) -> bool {
        let v = self.doubled();
        let n = v.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            for j in i + 1..n {
                // Skip the edge itself and the two edges sharing a vertex.
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let c = v[j];
                let d = v[(j + 1) % n];
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: (i64, i64), a: (i64, i64), b: (i64, i64)) -> bool {
    cross(a, b, p) == 0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

fn segments_intersect(a: (i64, i64), b: (i64, i64), c: (i64, i64), d: (i64, i64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)) {
        return true;
    }
    (d1 == 0 && on_segment(a, c, d))
        || (d2 == 0 && on_segment(b, c, d))
        || (d3 == 0 && on_segment(c, a, b))
        || (d4 == 0 && on_segment(d, a, b))
}

// ---------------------------------------------------------------------------
// Contour tracing
// ---------------------------------------------------------------------------

/// Traces the closed outer boundary of the single 4-connected foreground
/// component as a polygon along pixel edges, with exactly-collinear corners
/// merged. Rasterizing the result reproduces a hole-free mask exactly.
///
/// Errors with [`Error::MultiComponent`] unless the mask has exactly one
/// component.
pub fn trace_contour(mask: &BinaryMask) -> Result<Polygon> {
    let (_, n) = label_components(mask);
    if n != 1 {
        return Err(Error::MultiComponent { count: n });
    }

    // Start at the top edge of the first foreground pixel in scan order;
    // every pixel above it is background.
    let start_idx = mask.data.iter().position(|&v| v == 1).unwrap();
    let (sy, sx) = ((start_idx / mask.w) as i64, (start_idx % mask.w) as i64);

    // Directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y. The region stays on the
    // right-hand side of the walk (image y grows downward).
    const STEP: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    // Outgoing edge in direction d from corner (cx, cy) requires this pixel
    // to be foreground and that one background.
    let edge_ok = |cx: i64, cy: i64, d: usize| -> bool {
        let (fg, bg) = match d {
            0 => ((cx, cy), (cx, cy - 1)),
            1 => ((cx - 1, cy), (cx, cy)),
            2 => ((cx - 1, cy - 1), (cx - 1, cy)),
            _ => ((cx, cy - 1), (cx - 1, cy - 1)),
        };
        mask.at(fg.1, fg.0) == 1 && mask.at(bg.1, bg.0) == 0
    };

    let (start_cx, start_cy, start_dir) = (sx, sy, 0usize);
    debug_assert!(edge_ok(start_cx, start_cy, start_dir));

    let mut vertices: Vec<Pt> = Vec::new();
    let (mut cx, mut cy, mut dir) = (start_cx, start_cy, start_dir);
    let limit = 4 * (mask.h + 1) * (mask.w + 1) + 4;
    for _ in 0..limit {
        // Advance along the current edge.
        cx += STEP[dir].0;
        cy += STEP[dir].1;
        // Choose the next direction: right turn first (tightest), then
        // straight, then left. Right-first keeps diagonal neighbors
        // disconnected, matching 4-connectivity.
        let mut next = None;
        for turn in [3usize, 0, 1] {
            let cand = (dir + turn) % 4;
            if edge_ok(cx, cy, cand) {
                next = Some(cand);
                break;
            }
        }
        let next = next.expect("boundary walk must continue");
        if next != dir {
            vertices.push(Pt::new(cx as f64, cy as f64));
        }
        dir = next;
        if cx == start_cx && cy == start_cy && dir == start_dir {
            break;
        }
    }
    // The walk records corners on direction change, so the start corner is
    // captured when the loop closes. Rotate so the first vertex is the
    // lexicographically smallest for determinism.
    let min_idx = vertices
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (a.y, a.x).partial_cmp(&(b.y, b.x)).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    vertices.rotate_left(min_idx);
    Ok(Polygon::new(vertices))
}

// ---------------------------------------------------------------------------
// Douglas–Peucker simplification
// ---------------------------------------------------------------------------

fn point_segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let (wx, wy) = (p.x - a.x, p.y - a.y);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return (wx * wx + wy * wy).sqrt();
    }
    let t = ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0);
    let (dx, dy) = (p.x - (a.x + t * vx), p.y - (a.y + t * vy));
    (dx * dx + dy * dy).sqrt()
}

fn dp_chain(points: &[Pt], epsilon: f64, keep: &mut Vec<Pt>) {
    if points.len() <= 2 {
        keep.extend_from_slice(&points[..points.len().saturating_sub(1)]);
        return;
    }
    let (a, b) = (points[0], points[points.len() - 1]);
    let mut max_d = -1.0;
    let mut max_i = 0;
    for (i, &p) in points.iter().enumerate().skip(1).take(points.len() - 2) {
        let d = point_segment_distance(p, a, b);
        if d > max_d {
            max_d = d;
            max_i = i;
        }
    }
    if max_d > epsilon {
        dp_chain(&points[..=max_i], epsilon, keep);
        dp_chain(&points[max_i..], epsilon, keep);
    } else {
        keep.push(a);
    }
}

/// Removes ring vertices lying exactly on the segment between their
/// neighbors (zero deviation, so the simplification bound is unaffected).
fn merge_collinear(mut verts: Vec<Pt>) -> Vec<Pt> {
    loop {
        let n = verts.len();
        if n <= 3 {
            return verts;
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = verts[(i + n - 1) % n];
            let cur = verts[i];
            let next = verts[(i + 1) % n];
            let cr = (cur.x - prev.x) * (next.y - prev.y) - (cur.y - prev.y) * (next.x - prev.x);
            let between = cur.x >= prev.x.min(next.x)
                && cur.x <= prev.x.max(next.x)
                && cur.y >= prev.y.min(next.y)
                && cur.y <= prev.y.max(next.y);
            if cr == 0.0 && between {
                continue;
            }
            out.push(cur);
        }
        if out.len() == n {
            return out;
        }
        verts = out;
    }
}

/// Douglas–Peucker simplification of a closed polygon.
///
/// The output is a subsequence of the input vertices and every dropped
/// vertex lies within `epsilon` of the simplified chain. `epsilon == 0`
/// returns the input unchanged. Errors with [`Error::DegeneratePolygon`]
/// if fewer than 3 vertices survive.
pub fn douglas_peucker(poly: &Polygon, epsilon: f64) -> Result<Polygon> {
    if epsilon < 0.0 {
        return Err(Error::invalid_params(
            "geometry.douglas_peucker",
            "epsilon must be >= 0",
        ));
    }
    let n = poly.len();
    if n < 3 {
        return Err(Error::DegeneratePolygon);
    }
    if epsilon == 0.0 {
        return Ok(poly.clone());
    }

    // Split the ring at two far-apart anchors so each half simplifies as an
    // open chain. Anchoring at extreme points keeps true corners.
    let c = poly.centroid();
    let dist2 = |p: Pt, q: Pt| (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
    let a1 = (0..n)
        .max_by(|&i, &j| {
            dist2(poly.vertices[i], c)
                .partial_cmp(&dist2(poly.vertices[j], c))
                .unwrap()
                .then(j.cmp(&i))
        })
        .unwrap();
    let a2 = (0..n)
        .filter(|&i| i != a1)
        .max_by(|&i, &j| {
            dist2(poly.vertices[i], poly.vertices[a1])
                .partial_cmp(&dist2(poly.vertices[j], poly.vertices[a1]))
                .unwrap()
                .then(j.cmp(&i))
        })
        .unwrap();
    let (a1, a2) = (a1.min(a2), a1.max(a2));

    let chain1: Vec<Pt> = poly.vertices[a1..=a2].to_vec();
    let mut chain2: Vec<Pt> = poly.vertices[a2..].to_vec();
    chain2.extend_from_slice(&poly.vertices[..=a1]);

    let mut keep = Vec::new();
    dp_chain(&chain1, epsilon, &mut keep);
    dp_chain(&chain2, epsilon, &mut keep);
    let keep = merge_collinear(keep);
    if keep.len() < 3 {
        return Err(Error::DegeneratePolygon);
    }
    Ok(Polygon::new(keep))
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

/// Rasterizes a polygon: a pixel is set iff its center is inside under the
/// even-odd rule; centers exactly on an edge count as inside.
///
/// Coordinates are quantized to the half-pixel grid, which makes the test
/// exact for traced contours and their simplifications.
pub fn rasterize(poly: &Polygon, h: usize, w: usize) -> BinaryMask {
    let v = poly.doubled();
    let n = v.len();
    let mut out = BinaryMask::zeros(h, w);
    if n < 3 {
        return out;
    }
    for y in 0..h {
        let py = 2 * y as i64 + 1;
        for x in 0..w {
            let px = 2 * x as i64 + 1;
            let mut inside = false;
            let mut on_edge = false;
            for i in 0..n {
                let a = v[i];
                let b = v[(i + 1) % n];
                if on_segment((px, py), a, b) {
                    on_edge = true;
                    break;
                }
                // Even-odd ray cast toward +x. Centers have odd coordinates
                // and vertices even ones, so the ray never hits a vertex.
                if (a.1 > py) != (b.1 > py) {
                    let num = (a.0 - px) * (b.1 - a.1) + (py - a.1) * (b.0 - a.0);
                    if (b.1 > a.1 && num > 0) || (b.1 < a.1 && num < 0) {
                        inside = !inside;
                    }
                }
            }
            if inside || on_edge {
                out.set(y, x, 1);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Bounded polygon annotations
// ---------------------------------------------------------------------------

/// Geometry generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Disk radius for the dilation/erosion that seeds the polygon pair.
    pub radius: u32,
    /// Douglas–Peucker tolerance in pixels.
    pub epsilon: f64,
    /// Soft cap on vertices per polygon.
    pub vertex_cap: usize,
    /// Scribble lines per class.
    pub scribble_lines: usize,
    /// Scribble thickness in pixels.
    pub scribble_thickness: u32,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            radius: 2,
            epsilon: 1.5,
            vertex_cap: 32,
            scribble_lines: 1,
            scribble_thickness: 2,
        }
    }
}

/// The inscribed/envelope polygon pair with their rasterized masks.
///
/// Invariants: `inscribed_mask ⊆ envelope_mask`, both nonempty, and the
/// band between them contains at least one pixel. Both masks equal the
/// rasterization of their polygon.
#[derive(Debug, Clone)]
pub struct BoundedPolygonAnnotation {
    pub inscribed: Polygon,
    pub envelope: Polygon,
    pub inscribed_mask: BinaryMask,
    pub envelope_mask: BinaryMask,
}

impl BoundedPolygonAnnotation {
    /// Reconstructs the annotation from polygons alone.
    pub fn from_polygons(inscribed: Polygon, envelope: Polygon, h: usize, w: usize) -> Self {
        let inscribed_mask = rasterize(&inscribed, h, w);
        let envelope_mask = rasterize(&envelope, h, w);
        BoundedPolygonAnnotation {
            inscribed,
            envelope,
            inscribed_mask,
            envelope_mask,
        }
    }

    pub fn band(&self) -> BinaryMask {
        self.envelope_mask.minus(&self.inscribed_mask)
    }
}

/// Simplifies `contour` with the largest tolerance (halving from
/// `epsilon`) whose rasterization satisfies `accept` and is simple.
/// Tolerance zero reproduces the contour exactly, so the search always
/// terminates.
fn simplify_with_constraint(
    contour: &Polygon,
    epsilon: f64,
    h: usize,
    w: usize,
    vertex_cap: usize,
    accept: impl Fn(&BinaryMask) -> bool,
) -> Result<(Polygon, BinaryMask)> {
    let mut eps = epsilon;
    for _ in 0..6 {
        if let Ok(poly) = douglas_peucker(contour, eps) {
            let rast = rasterize(&poly, h, w);
            if !rast.is_blank() && accept(&rast) && poly.is_simple() {
                if poly.len() > vertex_cap {
                    log::warn!(
                        "simplified polygon has {} vertices (cap {})",
                        poly.len(),
                        vertex_cap
                    );
                }
                return Ok((poly, rast));
            }
        }
        eps /= 2.0;
    }
    // Exact contour as the fallback; by construction it satisfies the
    // containment constraints that seeded it.
    let rast = rasterize(contour, h, w);
    if rast.is_blank() || !accept(&rast) {
        return Err(Error::DegeneratePolygon);
    }
    Ok((contour.clone(), rast))
}

/// Builds a bounded polygon annotation from a dense mask.
///
/// The inscribed polygon is a simplified contour of the eroded mask and the
/// envelope a simplified contour of the dilated mask; tolerances back off
/// until `rasterize(inscribed) ⊆ mask ⊆ rasterize(envelope)` holds
/// pixelwise, so the stored masks always rasterize from the polygons.
pub fn make_bpanno(
    gt: &BinaryMask,
    params: &GeometryParams,
) -> Result<BoundedPolygonAnnotation> {
    if gt.is_blank() {
        return Err(Error::NoForeground {
            op: "geometry.make_bpanno",
        });
    }
    let n_comp = label_components(gt).1;
    let gt = if n_comp > 1 {
        log::warn!("make_bpanno: keeping largest of {n_comp} components");
        largest_component(gt)
    } else {
        gt.clone()
    };
    let (h, w) = (gt.h, gt.w);

    let (dilated, eroded) = dilate_erode(&gt, params.radius)?;
    let ins_base = largest_component(&fill_holes(&eroded));
    let env_base = fill_holes(&dilated);

    let ins_contour = trace_contour(&ins_base)?;
    let env_contour = trace_contour(&env_base)?;

    let (inscribed, inscribed_mask) = simplify_with_constraint(
        &ins_contour,
        params.epsilon,
        h,
        w,
        params.vertex_cap,
        |rast| rast.subset_of(&gt),
    )?;
    let (envelope, mut envelope_mask) = simplify_with_constraint(
        &env_contour,
        params.epsilon,
        h,
        w,
        params.vertex_cap,
        |rast| gt.subset_of(rast),
    )?;

    // Guarantee a nonempty band; the exact envelope strictly contains the
    // mask because dilation with radius >= 1 strictly grows it.
    let mut envelope = envelope;
    if envelope_mask.minus(&inscribed_mask).is_blank() {
        envelope = env_contour;
        envelope_mask = rasterize(&envelope, h, w);
    }
    debug_assert!(inscribed_mask.subset_of(&envelope_mask));
    Ok(BoundedPolygonAnnotation {
        inscribed,
        envelope,
        inscribed_mask,
        envelope_mask,
    })
}

// ---------------------------------------------------------------------------
// Region partition
// ---------------------------------------------------------------------------

/// Per-pixel region label. The discriminant doubles as the 3-class
/// classification label: 0 outside, 1 band, 2 inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Region {
    Outside = 0,
    Band = 1,
    Inside = 2,
}

/// Disjoint cover of the image into inside / band / outside, with the
/// uncertain-band mask and 3-class labels derived from it.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    pub h: usize,
    pub w: usize,
    pub region: Vec<Region>,
    /// 1 exactly on band pixels.
    pub m_u: BinaryMask,
}

impl RegionPartition {
    #[inline]
    pub fn class_label(&self, i: usize) -> u8 {
        self.region[i] as u8
    }

    pub fn count(&self, r: Region) -> usize {
        self.region.iter().filter(|&&v| v == r).count()
    }

    /// 1 on inside pixels, 0 elsewhere (the certain foreground labels).
    pub fn certain_foreground(&self) -> BinaryMask {
        BinaryMask {
            h: self.h,
            w: self.w,
            data: self
                .region
                .iter()
                .map(|&r| (r == Region::Inside) as u8)
                .collect(),
        }
    }
}

/// Splits the image into inside / band / outside from an annotation.
pub fn make_partition(anno: &BoundedPolygonAnnotation) -> RegionPartition {
    let (h, w) = (anno.envelope_mask.h, anno.envelope_mask.w);
    let mut region = Vec::with_capacity(h * w);
    let mut m_u = BinaryMask::zeros(h, w);
    for i in 0..h * w {
        let inside = anno.inscribed_mask.data[i] == 1;
        let env = anno.envelope_mask.data[i] == 1;
        let r = if inside {
            Region::Inside
        } else if env {
            Region::Band
        } else {
            Region::Outside
        };
        if r == Region::Band {
            m_u.data[i] = 1;
        }
        region.push(r);
    }
    RegionPartition { h, w, region, m_u }
}

// ---------------------------------------------------------------------------
// Scribbles, boxes, rectangles
// ---------------------------------------------------------------------------

/// Scribble annotation: sparse strokes inside each class region.
#[derive(Debug, Clone)]
pub struct Scribble {
    pub fg: BinaryMask,
    pub bg: BinaryMask,
    /// Accepted stroke endpoints per class, for the annotation-cost proxy.
    pub fg_endpoints: Vec<[[i64; 2]; 2]>,
    pub bg_endpoints: Vec<[[i64; 2]; 2]>,
}

fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut pts = Vec::new();
    loop {
        pts.push((x, y));
        if (x, y) == b {
            return pts;
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

/// Draws strokes for one class: random chords between region pixels,
/// truncated at the region border when a chord exits, then thickened and
/// clipped back to the region.
fn scribble_class(
    region: &BinaryMask,
    n_lines: usize,
    thickness: u32,
    rng: &mut ChaCha8Rng,
) -> (BinaryMask, Vec<[[i64; 2]; 2]>) {
    let mut pixels: Vec<(i64, i64)> = Vec::new();
    for y in 0..region.h {
        for x in 0..region.w {
            if region.get(y, x) == 1 {
                pixels.push((x as i64, y as i64));
            }
        }
    }
    let mut out = BinaryMask::zeros(region.h, region.w);
    let mut endpoints = Vec::new();
    let brush = ((thickness / 2) as i64, mask::disk_offsets(thickness / 2));
    for _ in 0..n_lines {
        let mut accepted: Option<Vec<(i64, i64)>> = None;
        for _ in 0..40 {
            let a = *pixels.choose(rng).unwrap();
            let b = *pixels.choose(rng).unwrap();
            let line = bresenham(a, b);
            if line.iter().all(|&(x, y)| region.at(y, x) == 1) {
                accepted = Some(line);
                break;
            }
        }
        let line = accepted.unwrap_or_else(|| {
            // Fallback: walk from a random pixel toward another and stop
            // just before leaving the region.
            let a = *pixels.choose(rng).unwrap();
            let b = *pixels.choose(rng).unwrap();
            let full = bresenham(a, b);
            let n_in = full
                .iter()
                .take_while(|&&(x, y)| region.at(y, x) == 1)
                .count();
            full[..n_in.max(1)].to_vec()
        });
        endpoints.push([
            [line[0].0, line[0].1],
            [line[line.len() - 1].0, line[line.len() - 1].1],
        ]);
        for &(x, y) in &line {
            if brush.0 == 0 {
                if region.at(y, x) == 1 {
                    out.set(y as usize, x as usize, 1);
                }
            } else {
                for &(dy, dx) in &brush.1 {
                    let (ny, nx) = (y + dy, x + dx);
                    if region.at(ny, nx) == 1 {
                        out.set(ny as usize, nx as usize, 1);
                    }
                }
            }
        }
    }
    (out, endpoints)
}

/// Simulates scribbles: `n_lines` strokes inside the foreground and the
/// same number inside the background. Deterministic for a fixed seed;
/// stroke pixels never leave their class region.
pub fn make_scribble(
    gt: &BinaryMask,
    n_lines: usize,
    thickness: u32,
    rng_seed: u64,
) -> Result<Scribble> {
    if gt.is_blank() {
        return Err(Error::NoForeground {
            op: "geometry.make_scribble",
        });
    }
    if n_lines < 1 {
        return Err(Error::invalid_params(
            "geometry.make_scribble",
            "n_lines must be >= 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (fg, fg_endpoints) = scribble_class(gt, n_lines, thickness, &mut rng);
    let background = gt.complement();
    let (bg, bg_endpoints) = scribble_class(&background, n_lines, thickness, &mut rng);
    Ok(Scribble {
        fg,
        bg,
        fg_endpoints,
        bg_endpoints,
    })
}

/// Tight bounding box as corner pair ((x0, y0), (x1, y1)), inclusive.
pub fn make_box(gt: &BinaryMask) -> Result<((usize, usize), (usize, usize))> {
    let (x0, y0, x1, y1) = mask::bounding_box(gt)?;
    Ok(((x0, y0), (x1, y1)))
}

/// The filled tight bounding box (rectangle annotation).
pub fn make_rectangle_mask(gt: &BinaryMask) -> Result<BinaryMask> {
    mask::rectangle_mask(gt)
}

// `Rng` is pulled in for `choose`; silence the unused-trait lint when the
// direct methods are not referenced.
#[allow(unused)]
fn _rng_assert(r: &mut ChaCha8Rng) -> u32 {
    r.gen()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mask(h: usize, w: usize, y0: usize, x0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(h, w, |y, x| {
            y >= y0 && y < y0 + side && x >= x0 && x < x0 + side
        })
    }

    fn disk_mask(h: usize, w: usize, cy: f64, cx: f64, r: f64) -> BinaryMask {
        BinaryMask::from_fn(h, w, |y, x| {
            let (yc, xc) = (y as f64 + 0.5, x as f64 + 0.5);
            (yc - cy).powi(2) + (xc - cx).powi(2) <= r * r
        })
    }

    #[test]
    fn trace_3x3_square_gives_four_corners() {
        let m = square_mask(9, 9, 2, 3, 3);
        let poly = trace_contour(&m).unwrap();
        assert_eq!(poly.len(), 4);
        let mut coords = poly.to_coords();
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            coords,
            vec![[3.0, 2.0], [3.0, 5.0], [6.0, 2.0], [6.0, 5.0]]
        );
    }

    #[test]
    fn trace_l_shape_gives_six_vertices() {
        let mut m = square_mask(12, 12, 2, 2, 6);
        for y in 2..8 {
            for x in 5..8 {
                if y >= 5 {
                    m.set(y, x, 0);
                }
            }
        }
        // m is now an L: a 6x3 column plus a 3x3 top arm.
        let poly = trace_contour(&m).unwrap();
        assert_eq!(poly.len(), 6);
        assert_eq!(rasterize(&poly, 12, 12), m);
    }

    #[test]
    fn trace_empty_mask_errors_with_zero_components() {
        let m = BinaryMask::zeros(8, 8);
        match trace_contour(&m) {
            Err(Error::MultiComponent { count: 0 }) => {}
            other => panic!("expected MultiComponent(0), got {other:?}"),
        }
    }

    #[test]
    fn trace_two_components_errors() {
        let mut m = BinaryMask::zeros(10, 10);
        m.set(1, 1, 1);
        m.set(8, 8, 1);
        assert!(matches!(
            trace_contour(&m),
            Err(Error::MultiComponent { count: 2 })
        ));
    }

    #[test]
    fn trace_round_trips_exactly_through_rasterize() {
        for r in [3.0, 5.5, 8.2] {
            let m = disk_mask(24, 24, 12.0, 11.0, r);
            let poly = trace_contour(&m).unwrap();
            assert_eq!(rasterize(&poly, 24, 24), m, "radius {r}");
            assert!(poly.is_simple());
        }
        // Single pixel: the unit square.
        let mut single = BinaryMask::zeros(8, 8);
        single.set(3, 4, 1);
        let poly = trace_contour(&single).unwrap();
        assert_eq!(poly.len(), 4);
        assert_eq!(rasterize(&poly, 8, 8), single);
    }

    #[test]
    fn dp_square_with_midpoints_collapses_to_corners() {
        let poly = Polygon::from_coords(&[
            [0.0, 0.0],
            [2.0, 0.0],
            [4.0, 0.0],
            [4.0, 2.0],
            [4.0, 4.0],
            [2.0, 4.0],
            [0.0, 4.0],
            [0.0, 2.0],
        ]);
        let out = douglas_peucker(&poly, 0.5).unwrap();
        assert_eq!(out.len(), 4);
        let mut coords = out.to_coords();
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            coords,
            vec![[0.0, 0.0], [0.0, 4.0], [4.0, 0.0], [4.0, 4.0]]
        );
    }

    #[test]
    fn dp_epsilon_zero_returns_input_unchanged() {
        let poly = Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 3.0]]);
        let out = douglas_peucker(&poly, 0.0).unwrap();
        assert_eq!(out, poly);
    }

    #[test]
    fn dp_degenerate_input_errors() {
        let poly = Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(
            douglas_peucker(&poly, 1.0),
            Err(Error::DegeneratePolygon)
        ));
    }

    /// Brute-force deviation check: every input vertex within epsilon of
    /// the simplified ring.
    fn max_deviation(input: &Polygon, simplified: &Polygon) -> f64 {
        let n = simplified.len();
        input
            .vertices
            .iter()
            .map(|&p| {
                (0..n)
                    .map(|i| {
                        point_segment_distance(
                            p,
                            simplified.vertices[i],
                            simplified.vertices[(i + 1) % n],
                        )
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn dp_dense_circle_respects_deviation_bound() {
        let n = 126;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [32.0 + 20.0 * t.cos(), 32.0 + 20.0 * t.sin()]
            })
            .collect();
        let poly = Polygon::from_coords(&pts);
        let out = douglas_peucker(&poly, 2.0).unwrap();
        assert!(out.len() >= 3 && out.len() < n / 3, "got {}", out.len());
        // Subsequence check.
        let mut idx = 0usize;
        for v in &out.vertices {
            while idx < n && poly.vertices[idx] != *v {
                idx += 1;
            }
            assert!(idx < n, "output vertex not an input vertex in order");
            idx += 1;
        }
        let dev = max_deviation(&poly, &out);
        assert!(dev <= 2.0 + 1e-9, "max deviation {dev}");
    }

    #[test]
    fn rasterize_counts_on_edge_centers_as_inside() {
        // A diagonal polygon whose edge passes exactly through centers.
        let poly = Polygon::from_coords(&[[0.0, 0.0], [6.0, 6.0], [6.0, 0.0]]);
        let m = rasterize(&poly, 8, 8);
        // Centers (k+0.5, k+0.5) lie on the diagonal edge.
        for k in 0..6 {
            assert_eq!(m.get(k, k), 1, "diagonal center {k}");
        }
        assert_eq!(m.get(7, 0), 0);
    }

    #[test]
    fn bpanno_containment_chain_on_disk() {
        let gt = disk_mask(64, 64, 32.0, 32.0, 10.0);
        let params = GeometryParams::default();
        let anno = make_bpanno(&gt, &params).unwrap();
        assert!(anno.inscribed_mask.subset_of(&gt));
        assert!(gt.subset_of(&anno.envelope_mask));
        assert!(anno.inscribed_mask.subset_of(&anno.envelope_mask));
        assert!(anno.band().count() >= 1);
        assert!(!anno.inscribed_mask.is_blank());
        // Masks equal the rasterization of their polygons.
        assert_eq!(rasterize(&anno.inscribed, 64, 64), anno.inscribed_mask);
        assert_eq!(rasterize(&anno.envelope, 64, 64), anno.envelope_mask);
        assert!(anno.inscribed.len() <= params.vertex_cap);
    }

    #[test]
    fn bpanno_single_pixel_errors_erosion_empty() {
        let mut gt = BinaryMask::zeros(16, 16);
        gt.set(8, 8, 1);
        assert!(matches!(
            make_bpanno(&gt, &GeometryParams::default()),
            Err(Error::ErosionEmpty { .. })
        ));
    }

    #[test]
    fn partition_is_disjoint_cover() {
        let gt = disk_mask(64, 64, 30.0, 34.0, 12.0);
        let anno = make_bpanno(&gt, &GeometryParams::default()).unwrap();
        let part = make_partition(&anno);
        let (i, b, o) = (
            part.count(Region::Inside),
            part.count(Region::Band),
            part.count(Region::Outside),
        );
        assert_eq!(i + b + o, 64 * 64);
        assert_eq!(i, anno.inscribed_mask.count());
        assert_eq!(b, anno.band().count());
        // M_u equals envelope minus inscribed pixelwise.
        assert_eq!(part.m_u, anno.band());
        // Class labels follow the region convention.
        for idx in 0..part.region.len() {
            let expect = match part.region[idx] {
                Region::Outside => 0,
                Region::Band => 1,
                Region::Inside => 2,
            };
            assert_eq!(part.class_label(idx), expect);
        }
    }

    #[test]
    fn partition_band_of_one_pixel() {
        // Envelope = inscribed plus exactly one pixel.
        let ins = square_mask(12, 12, 4, 4, 4);
        let mut env = ins.clone();
        env.set(4, 8, 1);
        let anno = BoundedPolygonAnnotation {
            inscribed: trace_contour(&ins).unwrap(),
            envelope: trace_contour(&env).unwrap(),
            inscribed_mask: ins,
            envelope_mask: env,
        };
        let part = make_partition(&anno);
        assert_eq!(part.count(Region::Band), 1);
    }

    #[test]
    fn scribble_is_deterministic_and_in_class() {
        let gt = disk_mask(48, 48, 24.0, 24.0, 10.0);
        let s1 = make_scribble(&gt, 2, 2, 77).unwrap();
        let s2 = make_scribble(&gt, 2, 2, 77).unwrap();
        assert_eq!(s1.fg, s2.fg);
        assert_eq!(s1.bg, s2.bg);
        assert!(s1.fg.subset_of(&gt));
        assert!(s1.bg.subset_of(&gt.complement()));
        assert!(!s1.fg.is_blank());
        assert!(!s1.bg.is_blank());
    }

    #[test]
    fn scribble_membership_over_many_masks() {
        for seed in 0..25u64 {
            let r = 6.0 + (seed % 7) as f64;
            let cx = 18.0 + (seed % 11) as f64;
            let gt = disk_mask(48, 48, 22.0, cx, r);
            let s = make_scribble(&gt, 1, 2, seed).unwrap();
            assert!(s.fg.subset_of(&gt), "seed {seed}");
            assert!(s.bg.subset_of(&gt.complement()), "seed {seed}");
        }
    }

    #[test]
    fn box_of_single_pixel() {
        let mut gt = BinaryMask::zeros(12, 12);
        gt.set(7, 5, 1);
        assert_eq!(make_box(&gt).unwrap(), ((5, 7), (5, 7)));
    }

    #[test]
    fn box_is_tight_on_random_blob() {
        let gt = disk_mask(40, 40, 20.0, 17.0, 8.3);
        let ((x0, y0), (x1, y1)) = make_box(&gt).unwrap();
        let rect = make_rectangle_mask(&gt).unwrap();
        assert!(gt.subset_of(&rect));
        // Shrinking any side by one excludes at least one foreground pixel.
        let shrunk = [
            (x0 + 1, y0, x1, y1),
            (x0, y0 + 1, x1, y1),
            (x0, y0, x1 - 1, y1),
            (x0, y0, x1, y1 - 1),
        ];
        for (sx0, sy0, sx1, sy1) in shrunk {
            let mut excluded = false;
            for y in 0..gt.h {
                for x in 0..gt.w {
                    if gt.get(y, x) == 1 && (x < sx0 || x > sx1 || y < sy0 || y > sy1) {
                        excluded = true;
                    }
                }
            }
            assert!(excluded);
        }
    }
}
