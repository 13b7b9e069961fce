//! Binary masks and the pixel-level operations the annotation pipeline
//! builds on: disk morphology, connected components, hole filling,
//! bounding boxes.
//!
//! Pixel model: pixel (x, y) is the unit square [x, x+1) × [y, y+1) with
//! center (x + 0.5, y + 0.5). Foreground is 4-connected.

use crate::error::{Error, Result};

/// An H×W grid of {0, 1}. Both dimensions must be at least 8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

/// Minimum mask side length.
pub const MIN_SIDE: usize = 8;

impl BinaryMask {
    pub fn zeros(h: usize, w: usize) -> Self {
        assert!(
            h >= MIN_SIDE && w >= MIN_SIDE,
            "mask sides must be >= {MIN_SIDE}, got {h}x{w}"
        );
        BinaryMask {
            h,
            w,
            data: vec![0; h * w],
        }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                if f(y, x) {
                    m.data[y * w + x] = 1;
                }
            }
        }
        m
    }

    /// Builds a mask from raw 0/1 data.
    pub fn from_data(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::shape_mismatch(
                "mask.from_data",
                format!("data length {} != {h}x{w}", data.len()),
            ));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid_params(
                "mask.from_data",
                "values must be 0 or 1",
            ));
        }
        assert!(h >= MIN_SIDE && w >= MIN_SIDE);
        Ok(BinaryMask { h, w, data })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        debug_assert!(v <= 1);
        self.data[y * self.w + x] = v;
    }

    #[inline]
    pub fn at(&self, y: i64, x: i64) -> u8 {
        if y < 0 || x < 0 || y as usize >= self.h || x as usize >= self.w {
            0
        } else {
            self.data[y as usize * self.w + x as usize]
        }
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_blank(&self) -> bool {
        self.count() == 0
    }

    /// True iff every foreground pixel of `self` is foreground in `other`.
    pub fn subset_of(&self, other: &BinaryMask) -> bool {
        self.h == other.h
            && self.w == other.w
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a == 0 || b == 1)
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.h, self.w), (other.h, other.w));
        BinaryMask {
            h: self.h,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a | b)
                .collect(),
        }
    }

    pub fn intersect(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.h, self.w), (other.h, other.w));
        BinaryMask {
            h: self.h,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a & b)
                .collect(),
        }
    }

    /// Pixels in `self` but not `other`.
    pub fn minus(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.h, self.w), (other.h, other.w));
        BinaryMask {
            h: self.h,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a & (1 - b))
                .collect(),
        }
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Foreground pixels with a 4-neighbor outside the mask (image border
    /// counts as outside).
    pub fn boundary(&self) -> BinaryMask {
        let mut out = BinaryMask::zeros(self.h, self.w);
        for y in 0..self.h {
            for x in 0..self.w {
                if self.get(y, x) == 0 {
                    continue;
                }
                let (yi, xi) = (y as i64, x as i64);
                if self.at(yi - 1, xi) == 0
                    || self.at(yi + 1, xi) == 0
                    || self.at(yi, xi - 1) == 0
                    || self.at(yi, xi + 1) == 0
                {
                    out.set(y, x, 1);
                }
            }
        }
        out
    }
}

/// Integer offsets of a disk structuring element: dx² + dy² ≤ r².
pub fn disk_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let r2 = r * r;
    let mut offs = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r2 {
                offs.push((dy, dx));
            }
        }
    }
    offs
}

/// Disk dilation. Contributions outside the image are clipped.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let offs = disk_offsets(radius);
    let mut out = BinaryMask::zeros(mask.h, mask.w);
    for y in 0..mask.h {
        for x in 0..mask.w {
            if mask.get(y, x) == 0 {
                continue;
            }
            for &(dy, dx) in &offs {
                let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                if ny >= 0 && nx >= 0 && (ny as usize) < mask.h && (nx as usize) < mask.w {
                    out.set(ny as usize, nx as usize, 1);
                }
            }
        }
    }
    out
}

/// Disk erosion. Pixels outside the image count as background, so the
/// image border erodes inward.
pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let offs = disk_offsets(radius);
    let mut out = BinaryMask::zeros(mask.h, mask.w);
    'pixel: for y in 0..mask.h {
        for x in 0..mask.w {
            if mask.get(y, x) == 0 {
                continue;
            }
            for &(dy, dx) in &offs {
                if mask.at(y as i64 + dy, x as i64 + dx) == 0 {
                    continue 'pixel;
                }
            }
            out.set(y, x, 1);
        }
    }
    out
}

/// Disk dilation and erosion of the same mask.
///
/// Errors with [`Error::ErosionEmpty`] when erosion removes every
/// foreground pixel; the caller must reduce the radius.
pub fn dilate_erode(mask: &BinaryMask, radius: u32) -> Result<(BinaryMask, BinaryMask)> {
    if radius < 1 {
        return Err(Error::invalid_params(
            "geometry.dilate_erode",
            "radius must be >= 1",
        ));
    }
    if mask.is_blank() {
        return Err(Error::NoForeground {
            op: "geometry.dilate_erode",
        });
    }
    let dilated = dilate(mask, radius);
    let eroded = erode(mask, radius);
    if eroded.is_blank() {
        return Err(Error::ErosionEmpty { radius });
    }
    Ok((dilated, eroded))
}

/// 4-connected component labels (0 = background, components numbered from 1).
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, usize) {
    let (h, w) = (mask.h, mask.w);
    let mut labels = vec![0u32; h * w];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if mask.data[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (y, x) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.data[j] == 1 && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
        }
    }
    (labels, next as usize)
}

pub fn component_count(mask: &BinaryMask) -> usize {
    label_components(mask).1
}

/// Keeps only the largest 4-connected component (ties break to the lowest
/// label, which is deterministic). Returns the mask unchanged if it has
/// zero or one component.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, n) = label_components(mask);
    if n <= 1 {
        return mask.clone();
    }
    let mut sizes = vec![0usize; n + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let best = (1..=n).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l))).unwrap() as u32;
    BinaryMask {
        h: mask.h,
        w: mask.w,
        data: labels
            .iter()
            .map(|&l| if l == best { 1 } else { 0 })
            .collect(),
    }
}

/// Fills interior holes: background regions (8-connected) that do not touch
/// the image border become foreground.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = (mask.h, mask.w);
    // Flood the border-connected background with 8-connectivity.
    let mut outside = vec![false; h * w];
    let mut stack = Vec::new();
    let seed = |i: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if mask.data[i] == 0 && !outside[i] {
            outside[i] = true;
            stack.push(i);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut stack);
        seed((h - 1) * w + x, &mut outside, &mut stack);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut stack);
        seed(y * w + w - 1, &mut outside, &mut stack);
    }
    while let Some(i) = stack.pop() {
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dy == 0 && dx == 0 {
                    continue;
                }
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny as usize >= h || nx as usize >= w {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.data[j] == 0 && !outside[j] {
                    outside[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    BinaryMask {
        h,
        w,
        data: (0..h * w)
            .map(|i| if mask.data[i] == 1 || !outside[i] { 1 } else { 0 })
            .collect(),
    }
}

/// Tight axis-aligned bounding box as inclusive corners (x0, y0, x1, y1).
pub fn bounding_box(mask: &BinaryMask) -> Result<(usize, usize, usize, usize)> {
    let mut found = false;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..mask.h {
        for x in 0..mask.w {
            if mask.get(y, x) == 1 {
                found = true;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if !found {
        return Err(Error::NoForeground {
            op: "geometry.make_box",
        });
    }
    Ok((x0, y0, x1, y1))
}

/// The filled tight bounding box of the mask.
pub fn rectangle_mask(mask: &BinaryMask) -> Result<BinaryMask> {
    let (x0, y0, x1, y1) = bounding_box(mask)?;
    Ok(BinaryMask::from_fn(mask.h, mask.w, |y, x| {
        y >= y0 && y <= y1 && x >= x0 && x <= x1
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_mask(h: usize, w: usize, cy: f64, cx: f64, r: f64) -> BinaryMask {
        BinaryMask::from_fn(h, w, |y, x| {
            let (yc, xc) = (y as f64 + 0.5, x as f64 + 0.5);
            (yc - cy).powi(2) + (xc - cx).powi(2) <= r * r
        })
    }

    #[test]
    fn full_image_dilation_saturates_and_erosion_shrinks() {
        let full = BinaryMask::from_fn(16, 16, |_, _| true);
        let (dilated, eroded) = dilate_erode(&full, 1).unwrap();
        assert_eq!(dilated.count(), 16 * 16);
        assert!(eroded.count() < full.count());
        assert!(eroded.subset_of(&full));
    }

    #[test]
    fn single_pixel_erosion_is_empty() {
        let mut m = BinaryMask::zeros(8, 8);
        m.set(4, 4, 1);
        match dilate_erode(&m, 1) {
            Err(Error::ErosionEmpty { radius: 1 }) => {}
            other => panic!("expected ErosionEmpty, got {other:?}"),
        }
    }

    /// Brute-force morphology oracle: per-pixel disk scan.
    fn morph_oracle(mask: &BinaryMask, radius: u32, dilate: bool) -> BinaryMask {
        let r2 = (radius * radius) as i64;
        BinaryMask::from_fn(mask.h, mask.w, |y, x| {
            let mut any = false;
            let mut all = true;
            for dy in -(radius as i64)..=radius as i64 {
                for dx in -(radius as i64)..=radius as i64 {
                    if dy * dy + dx * dx > r2 {
                        continue;
                    }
                    let v = mask.at(y as i64 + dy, x as i64 + dx);
                    any |= v == 1;
                    all &= v == 1;
                }
            }
            if dilate {
                any
            } else {
                all && mask.get(y, x) == 1
            }
        })
    }

    #[test]
    fn disk_morphology_matches_brute_force_oracle() {
        let m = disk_mask(64, 64, 32.0, 32.0, 6.0);
        let (dilated, eroded) = dilate_erode(&m, 2).unwrap();
        assert_eq!(dilated, morph_oracle(&m, 2, true));
        assert_eq!(eroded, morph_oracle(&m, 2, false));
        // Containment chain.
        assert!(eroded.subset_of(&m));
        assert!(m.subset_of(&dilated));
        // Radii roughly 4 and 8.
        let oracle4 = disk_mask(64, 64, 32.0, 32.0, 4.0);
        let oracle8 = disk_mask(64, 64, 32.0, 32.0, 8.0);
        assert!(oracle4.subset_of(&eroded));
        assert!(dilated.subset_of(&oracle8));
    }

    #[test]
    fn opening_and_closing_containments() {
        let m = disk_mask(48, 48, 20.0, 25.0, 9.0);
        for r in 1..=3u32 {
            let opened = dilate(&erode(&m, r), r);
            let closed = erode(&dilate(&m, r), r);
            assert!(opened.subset_of(&m), "opening must shrink, r={r}");
            assert!(m.subset_of(&closed), "closing must grow, r={r}");
        }
    }

    #[test]
    fn largest_component_keeps_biggest() {
        let mut m = BinaryMask::zeros(16, 16);
        for y in 2..6 {
            for x in 2..6 {
                m.set(y, x, 1);
            }
        }
        m.set(12, 12, 1);
        assert_eq!(component_count(&m), 2);
        let l = largest_component(&m);
        assert_eq!(l.count(), 16);
        assert_eq!(l.get(12, 12), 0);
    }

    #[test]
    fn fill_holes_closes_interior() {
        let mut ring = BinaryMask::zeros(12, 12);
        for y in 3..9 {
            for x in 3..9 {
                ring.set(y, x, 1);
            }
        }
        ring.set(5, 5, 0);
        ring.set(5, 6, 0);
        let filled = fill_holes(&ring);
        assert_eq!(filled.get(5, 5), 1);
        assert_eq!(filled.get(5, 6), 1);
        assert_eq!(filled.count(), 36);
        assert_eq!(filled.get(0, 0), 0);
    }

    #[test]
    fn bounding_box_single_pixel() {
        let mut m = BinaryMask::zeros(10, 10);
        m.set(7, 5, 1);
        assert_eq!(bounding_box(&m).unwrap(), (5, 7, 5, 7));
    }

    #[test]
    fn rectangle_mask_is_idempotent() {
        let m = disk_mask(32, 32, 15.0, 12.0, 7.0);
        let r1 = rectangle_mask(&m).unwrap();
        let r2 = rectangle_mask(&r1).unwrap();
        assert_eq!(r1, r2);
        assert!(m.subset_of(&r1));
    }

    #[test]
    fn empty_mask_bounding_box_errors() {
        let m = BinaryMask::zeros(8, 8);
        assert!(matches!(
            bounding_box(&m),
            Err(Error::NoForeground { .. })
        ));
    }
}
