use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Complex samples of a function on a [`GridSpec`], `x3` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField<T> {
    grid: GridSpec<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    /// Wraps samples, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: GridSpec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.total()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    /// Wraps samples produced internally; lengths are trusted, finiteness is not checked.
    pub(crate) fn from_parts(grid: GridSpec<T>, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), grid.total());
        Self { grid, values }
    }

    pub fn zeros(grid: &GridSpec<T>) -> Self {
        Self::from_parts(grid.clone(), vec![Complex::zero(); grid.total()])
    }

    pub fn from_fn(grid: &GridSpec<T>, mut f: impl FnMut([T; 3]) -> Complex<T>) -> Self {
        let values = (0..grid.total()).map(|i| f(grid.point(i))).collect();
        Self::from_parts(grid.clone(), values)
    }

    pub fn from_real_fn(grid: &GridSpec<T>, mut f: impl FnMut([T; 3]) -> T) -> Self {
        Self::from_fn(grid, |x| Complex::new(f(x), T::zero()))
    }

    pub fn from_real(grid: &GridSpec<T>, values: &[T]) -> Self {
        assert_eq!(values.len(), grid.total());
        Self::from_parts(
            grid.clone(),
            values.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        )
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn phase_rotated(&self, theta: T) -> Self {
        let phase = Complex::from_polar(T::one(), theta);
        self.map(|v| v * phase)
    }

    /// Periodic translation by whole grid steps.
    pub fn shifted(&self, shift: [isize; 3]) -> Self {
        let g = &self.grid;
        let mut out = vec![Complex::zero(); g.total()];
        for (idx, v) in self.values.iter().enumerate() {
            let i = g.unravel(idx);
            let j: Vec<usize> = (0..3)
                .map(|a| (i[a] as isize + shift[a]).rem_euclid(g.n[a] as isize) as usize)
                .collect();
            out[g.index(j[0], j[1], j[2])] = *v;
        }
        Self::from_parts(g.clone(), out)
    }

    pub fn modulus_sq(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn real_parts(&self) -> Vec<T> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), |a, b| a.max(b))
    }

    /// Discrete `L^2` norm: `sqrt(h1 h2 h3 * sum |f|^2)`.
    pub fn l2_norm(&self) -> T {
        (self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<T>()).sqrt()
    }

    /// `<f, g> = h1 h2 h3 * sum f conj(g)`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.check_grid(other)?;
        let s: Complex<T> = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self::from_parts(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid.n, other.grid.n)))
        }
    }

    /// Relative `L^2` distance `||self - other|| / ||other||`.
    pub fn relative_distance(&self, other: &Self) -> Result<T> {
        let diff = self.sub(other)?;
        let denom = other.l2_norm();
        Ok(if denom > T::zero() {
            diff.l2_norm() / denom
        } else {
            diff.l2_norm()
        })
    }

    pub fn cast<U: Real>(&self) -> ComplexField<U> {
        ComplexField::from_parts(
            self.grid.cast(),
            self.values
                .iter()
                .map(|v| Complex::new(U::lit(v.re.as_f64()), U::lit(v.im.as_f64())))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec<f64> {
        GridSpec::cubic(8, 4.0).unwrap()
    }

    #[test]
    fn construction_checks() {
        let g = grid();
        assert!(ComplexField::new(g.clone(), vec![Complex::zero(); 10]).is_err());
        let mut v = vec![Complex::zero(); g.total()];
        v[3] = Complex::new(f64::NAN, 0.0);
        assert!(matches!(ComplexField::new(g.clone(), v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constant_norms() {
        let g = grid();
        let f = ComplexField::from_real_fn(&g, |_| 2.0);
        assert!((f.l2_norm().powi(2) - 4.0 * 64.0).abs() < 1e-12);
        assert_eq!(f.sup_norm(), 2.0);
    }

    #[test]
    fn shift_is_periodic() {
        let g = grid();
        let f = ComplexField::from_real_fn(&g, |x| x[0] + 10.0 * x[1] + 100.0 * x[2]);
        let back = f.shifted([3, -2, 9]).shifted([-3, 2, -9]);
        assert_eq!(back, f);
        let once = f.shifted([1, 0, 0]);
        assert_eq!(once.values()[g.index(1, 0, 0)], f.values()[g.index(0, 0, 0)]);
    }
}
