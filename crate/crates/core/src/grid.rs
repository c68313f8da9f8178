use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Periodic Cartesian box `[-L/2, L/2)^3` sampled at `n1 x n2 x n3` points.
///
/// Sample `j` on axis `a` sits at `(j - n_a/2) * h_a`, so the origin is a grid
/// point and the reflection `x -> -x` maps the grid onto itself. Values are
/// stored with `x3` varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub n: [usize; 3],
    pub len: [T; 3],
}

impl<T: Real> GridSpec<T> {
    pub fn new(n: [usize; 3], len: [T; 3]) -> Result<Self> {
        for axis in 0..3 {
            if n[axis] < 8 || !n[axis].is_multiple_of(2) {
                return Err(Error::InvalidGrid(format!(
                    "n{} = {} must be even and at least 8",
                    axis + 1,
                    n[axis]
                )));
            }
            if !(len[axis] > T::zero()) || !len[axis].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "L{} = {} must be positive and finite",
                    axis + 1,
                    len[axis]
                )));
            }
        }
        Ok(Self { n, len })
    }

    pub fn cubic(n: usize, len: T) -> Result<Self> {
        Self::new([n; 3], [len; 3])
    }

    pub fn total(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.len[axis] / T::from_usize_lossy(self.n[axis])
    }

    pub fn cell_volume(&self) -> T {
        self.spacing(0) * self.spacing(1) * self.spacing(2)
    }

    pub fn volume(&self) -> T {
        self.len[0] * self.len[1] * self.len[2]
    }

    pub fn coordinate(&self, axis: usize, j: usize) -> T {
        let offset = j as i64 - (self.n[axis] / 2) as i64;
        T::lit(offset as f64) * self.spacing(axis)
    }

    pub fn coordinates(&self, axis: usize) -> Vec<T> {
        (0..self.n[axis]).map(|j| self.coordinate(axis, j)).collect()
    }

    /// Signed lattice index of FFT slot `j`, in `[-n/2, n/2)`.
    pub fn frequency_index(&self, axis: usize, j: usize) -> i64 {
        let n = self.n[axis];
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Angular wavenumbers `2 pi k / L` in FFT slot order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<T> {
        let scale = T::TAU() / self.len[axis];
        (0..self.n[axis])
            .map(|j| T::lit(self.frequency_index(axis, j) as f64) * scale)
            .collect()
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n[1] + i2) * self.n[2] + i3
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i3 = idx % self.n[2];
        let rest = idx / self.n[2];
        [rest / self.n[1], rest % self.n[1], i3]
    }

    pub fn point(&self, idx: usize) -> [T; 3] {
        let [i1, i2, i3] = self.unravel(idx);
        [self.coordinate(0, i1), self.coordinate(1, i2), self.coordinate(2, i3)]
    }

    /// Smallest half-width of the transverse `(x2, x3)` cross-section.
    pub fn transverse_half_width(&self) -> T {
        self.len[1].min(self.len[2]) / T::lit(2.0)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && (0..3).all(|a| Float::abs(self.len[a] - other.len[a]) <= T::lit(1e-12) * self.len[a])
    }

    /// Same grid with another scalar type.
    pub fn cast<U: Real>(&self) -> GridSpec<U> {
        GridSpec {
            n: self.n,
            len: self.len.map(|l| U::lit(l.as_f64())),
        }
    }
}
