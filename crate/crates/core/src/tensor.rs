//! Minimal flat-buffer tensors for per-sample numeric work.
//!
//! Row-major, contiguous. Shapes are (H, W) for [`Field`] and (C, H, W) for
//! [`Tensor3`]; batches are plain `Vec`s of per-sample tensors.

use crate::scalar::Scalar;

/// A single-channel H×W map of scalars (probabilities, entropy, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Field<S> {
    pub h: usize,
    pub w: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Field<S> {
    pub fn zeros(h: usize, w: usize) -> Self {
        Field {
            h,
            w,
            data: vec![S::zero(); h * w],
        }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        Field { h, w, data }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), h * w, "field data length must equal h*w");
        Field { h, w, data }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> S {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: S) {
        self.data[y * self.w + x] = v;
    }

    /// Cast element-wise to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Field<T> {
        Field {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| crate::scalar::s::<T>(crate::scalar::f(*v))).collect(),
        }
    }
}

/// A C×H×W tensor (images, activations, per-pixel class scores, embeddings).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<S> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor3<S> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor3 {
            c,
            h,
            w,
            data: vec![S::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length must equal c*h*w");
        Tensor3 { c, h, w, data }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[S] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [S] {
        let n = self.h * self.w;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> S {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: S) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    /// Per-pixel channel vector at flat spatial index `i`.
    pub fn pixel_vec(&self, i: usize) -> Vec<S> {
        let n = self.h * self.w;
        (0..self.c).map(|c| self.data[c * n + i]).collect()
    }

    pub fn cast<T: Scalar>(&self) -> Tensor3<T> {
        Tensor3 {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| crate::scalar::s::<T>(crate::scalar::f(*v))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_indexing_round_trips() {
        let mut f = Field::<f64>::zeros(3, 4);
        f.set(2, 1, 7.0);
        assert_eq!(f.get(2, 1), 7.0);
        assert_eq!(f.data[2 * 4 + 1], 7.0);
    }

    #[test]
    fn tensor3_planes_are_contiguous() {
        let mut t = Tensor3::<f32>::zeros(2, 2, 2);
        t.set(1, 0, 1, 5.0);
        assert_eq!(t.plane(1)[1], 5.0);
        assert_eq!(t.pixel_vec(1), vec![0.0, 5.0]);
    }
}
