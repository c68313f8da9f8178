use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::scalar::Real;
use crate::spectral::SpectralOps;

/// Model constants `c1`, `c2`, `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams<T> {
    pub c1: T,
    pub c2: T,
    pub alpha: T,
}

impl<T: Real> SimParams<T> {
    /// Accepts `c1, c2 >= 0` (zero couplings give the linear and local limits)
    /// and `0 < alpha < 4`.
    pub fn new(c1: T, c2: T, alpha: T) -> Result<Self> {
        let ok = |v: T| v.is_finite() && v >= T::zero();
        if !ok(c1) || !ok(c2) {
            return Err(Error::InvalidParams(format!(
                "couplings must be finite and nonnegative, got c1={c1}, c2={c2}"
            )));
        }
        if !(alpha > T::zero() && alpha < T::lit(4.0)) {
            return Err(Error::InvalidParams(format!("alpha={alpha} outside (0,4)")));
        }
        Ok(Self { c1, c2, alpha })
    }

    /// Whether `alpha` lies in the blow-up window `[4/3, 2]`.
    pub fn alpha_in_window(&self) -> bool {
        let a = self.alpha.as_f64();
        (4.0 / 3.0 - 1e-12..=2.0 + 1e-12).contains(&a)
    }

    pub fn focusing(&self) -> bool {
        self.c1 > T::zero() && self.c2 > T::zero()
    }

    pub fn cast<U: Real>(&self) -> SimParams<U> {
        SimParams {
            c1: U::lit(self.c1.as_f64()),
            c2: U::lit(self.c2.as_f64()),
            alpha: U::lit(self.alpha.as_f64()),
        }
    }
}

/// Sharp transverse mask for region-restricted integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region<T> {
    All,
    /// `|x_bar| < R`
    CylinderInside(T),
    /// `|x_bar| >= R`
    CylinderOutside(T),
}

impl<T: Real> Region<T> {
    /// Parses `all`, `cylinder_inside(R)` or `cylinder_outside(R)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(Region::All);
        }
        let radius = |body: &str| -> Result<T> {
            let r: f64 = body
                .strip_suffix(')')
                .and_then(|b| b.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("bad region radius in '{s}'")))?;
            if r.is_finite() && r > 0.0 {
                Ok(T::lit(r))
            } else {
                Err(Error::Config(format!("region radius must be positive in '{s}'")))
            }
        };
        if let Some(body) = s.strip_prefix("cylinder_inside(") {
            return Ok(Region::CylinderInside(radius(body)?));
        }
        if let Some(body) = s.strip_prefix("cylinder_outside(") {
            return Ok(Region::CylinderOutside(radius(body)?));
        }
        Err(Error::Config(format!("unknown region '{s}'")))
    }

    pub fn contains(&self, x: [T; 3]) -> bool {
        let r2 = x[1] * x[1] + x[2] * x[2];
        match *self {
            Region::All => true,
            Region::CylinderInside(r) => r2 < r * r,
            Region::CylinderOutside(r) => r2 >= r * r,
        }
    }
}

/// `|u|^p` with `0^p = 0`, from `|u|^2`.
pub(crate) fn modulus_power<T: Real>(modsq: T, p: T) -> T {
    if modsq <= T::zero() {
        T::zero()
    } else if p == T::lit(4.0) {
        modsq * modsq
    } else if p == T::lit(2.0) {
        modsq
    } else {
        modsq.powf(p / T::lit(2.0))
    }
}

/// `∫|u|^p` over a region.
pub fn lp_integral<T: Real>(u: &ComplexField<T>, p: T, region: Region<T>) -> T {
    let grid = u.grid();
    let mut acc = T::zero();
    for (idx, v) in u.values().iter().enumerate() {
        if matches!(region, Region::All) || region.contains(grid.point(idx)) {
            acc += modulus_power(v.norm_sqr(), p);
        }
    }
    acc * grid.cell_volume()
}

/// `‖u‖_{L^p(region)}`.
pub fn lp_norm<T: Real>(u: &ComplexField<T>, p: T, region: Region<T>) -> T {
    lp_integral(u, p, region).powf(T::one() / p)
}

pub fn mass<T: Real>(u: &ComplexField<T>) -> T {
    u.values().iter().map(|v| v.norm_sqr()).sum::<T>() * u.grid().cell_volume()
}

/// `‖∇u‖_2^2`.
pub fn h1dot_sq<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>) -> T {
    ops.h1dot_sq(u)
}

/// `‖u‖_{Ḣ¹}`.
pub fn h1dot<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>) -> T {
    ops.h1dot_sq(u).sqrt()
}

/// `⟨E1 g, g⟩` for real samples `g`, from the spectrum of `g`.
pub fn nonlocal_pairing<T: Real>(ops: &SpectralOps<T>, g: &[T]) -> T {
    let grid = ops.grid();
    let mut data: Vec<_> = g.iter().map(|&v| num_complex::Complex::new(v, T::zero())).collect();
    ops.forward_in_place(&mut data);
    let sigma = ops.e1_multiplier().samples();
    let acc: T = data.iter().zip(sigma).map(|(c, s)| *s * c.norm_sqr()).sum();
    acc * grid.cell_volume() / T::from_usize_lossy(grid.total())
}

/// `⟨E1(|u|^2), |u|^2⟩`.
pub fn nonlocal_form<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>) -> T {
    nonlocal_pairing(ops, &u.modulus_sq())
}

/// The three integrals every functional is built from, plus the mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitives<T> {
    pub mass: T,
    /// `‖∇u‖_2^2`
    pub kinetic: T,
    /// `∫|u|^{α+2}`
    pub power: T,
    /// `⟨E1(|u|^2), |u|^2⟩`
    pub nonlocal: T,
}

impl<T: Real> Primitives<T> {
    pub fn compute(ops: &SpectralOps<T>, u: &ComplexField<T>, p: &SimParams<T>) -> Result<Self> {
        if !ops.grid().same_shape(u.grid()) {
            return Err(Error::GridMismatch("field and operators differ".into()));
        }
        let kinetic = ops.h1dot_sq(u);
        Ok(Self::with_kinetic(ops, u, p, kinetic))
    }

    /// As [`Primitives::compute`] with `‖∇u‖_2^2` supplied by the caller.
    pub fn with_kinetic(ops: &SpectralOps<T>, u: &ComplexField<T>, p: &SimParams<T>, kinetic: T) -> Self {
        let modsq = u.modulus_sq();
        let dv = u.grid().cell_volume();
        let exponent = p.alpha + T::lit(2.0);
        let mass = modsq.iter().copied().sum::<T>() * dv;
        let power = modsq.iter().map(|&m| modulus_power(m, exponent)).sum::<T>() * dv;
        let nonlocal = nonlocal_pairing(ops, &modsq);
        Self {
            mass,
            kinetic,
            power,
            nonlocal,
        }
    }

    pub fn energy(&self, p: &SimParams<T>) -> T {
        T::lit(0.5) * self.kinetic - p.c1 / (p.alpha + T::lit(2.0)) * self.power - p.c2 / T::lit(4.0) * self.nonlocal
    }

    pub fn lagrangian(&self, p: &SimParams<T>) -> T {
        self.energy(p) + T::lit(0.5) * self.mass
    }

    pub fn pohozaev(&self, p: &SimParams<T>) -> T {
        let a = p.alpha;
        self.kinetic
            - T::lit(3.0) * p.c1 * a / (T::lit(2.0) * (a + T::lit(2.0))) * self.power
            - T::lit(0.75) * p.c2 * self.nonlocal
    }

    /// `⟨S'(u), u⟩ = ‖∇u‖² + ‖u‖² - c1 ∫|u|^{α+2} - c2 ⟨E1|u|², |u|²⟩`.
    pub fn nehari(&self, p: &SimParams<T>) -> T {
        self.kinetic + self.mass - p.c1 * self.power - p.c2 * self.nonlocal
    }

    pub fn report(&self, p: &SimParams<T>) -> FunctionalReport {
        let energy = self.energy(p);
        FunctionalReport {
            mass: self.mass.as_f64(),
            energy: energy.as_f64(),
            lagrangian: (energy + T::lit(0.5) * self.mass).as_f64(),
            pohozaev: self.pohozaev(p).as_f64(),
            h1dot_sq: self.kinetic.as_f64(),
            l_alpha_plus_2: self.power.as_f64(),
            nonlocal_form: self.nonlocal.as_f64(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub energy: f64,
    pub lagrangian: f64,
    pub pohozaev: f64,
    pub h1dot_sq: f64,
    pub l_alpha_plus_2: f64,
    pub nonlocal_form: f64,
}

impl FunctionalReport {
    pub const CSV_HEADER: &'static str = "mass,energy,lagrangian,pohozaev,h1dot_sq,l_alpha_plus_2,nonlocal_form";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.mass,
            self.energy,
            self.lagrangian,
            self.pohozaev,
            self.h1dot_sq,
            self.l_alpha_plus_2,
            self.nonlocal_form
        )
    }
}

pub fn functional_report<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    p: &SimParams<T>,
) -> Result<FunctionalReport> {
    Ok(Primitives::compute(ops, u, p)?.report(p))
}

pub fn energy<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>, p: &SimParams<T>) -> Result<T> {
    Ok(Primitives::compute(ops, u, p)?.energy(p))
}

pub fn pohozaev<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>, p: &SimParams<T>) -> Result<T> {
    Ok(Primitives::compute(ops, u, p)?.pohozaev(p))
}

pub fn lagrangian<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>, p: &SimParams<T>) -> Result<T> {
    Ok(Primitives::compute(ops, u, p)?.lagrangian(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::spectral::ZeroMode;
    use num_complex::Complex;
    use std::f64::consts::PI;

    fn params() -> SimParams<f64> {
        SimParams::new(1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SimParams::new(1.0, 1.0, 4.0).is_err());
        assert!(SimParams::new(-1.0, 1.0, 2.0).is_err());
        assert!(SimParams::new(1.0, 1.0, 1.5).unwrap().alpha_in_window());
        assert!(!SimParams::new(1.0, 1.0, 1.0).unwrap().alpha_in_window());
    }

    #[test]
    fn zero_field() {
        let grid = GridSpec::<f64>::cubic(8, 4.0).unwrap();
        let ops = SpectralOps::new(&grid, ZeroMode::SphericalMean);
        let r = functional_report(&ops, &ComplexField::zeros(&grid), &params()).unwrap();
        assert_eq!(r.mass, 0.0);
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.lagrangian, 0.0);
        assert_eq!(r.pohozaev, 0.0);
    }

    #[test]
    fn gaussian_mass() {
        let grid = GridSpec::<f64>::cubic(64, 20.0).unwrap();
        let u = ComplexField::from_real_fn(&grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp());
        let m = mass(&u);
        assert!((m / PI.powf(1.5) - 1.0).abs() < 1e-6, "{m}");
    }

    #[test]
    fn constant_mass_is_exact() {
        let grid = GridSpec::<f64>::new([8, 10, 12], [1.0, 2.0, 3.0]).unwrap();
        let u = ComplexField::from_fn(&grid, |_| Complex::new(0.6, 0.8) * 2.0);
        assert!((mass(&u) - 4.0 * 6.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_energy() {
        let grid = GridSpec::<f64>::new([16, 8, 8], [3.0, 2.0, 2.0]).unwrap();
        let ops = SpectralOps::new(&grid, ZeroMode::Vanishing);
        let (a, k) = (0.7, 2.0 * PI / 3.0);
        let u = ComplexField::from_fn(&grid, |x| Complex::from_polar(a, k * x[0]));
        let p = SimParams::new(1.3, 0.9, 1.5).unwrap();
        let prim = Primitives::compute(&ops, &u, &p).unwrap();
        let vol = grid.volume();
        assert!(prim.nonlocal.abs() < 1e-12);
        let expected = 0.5 * a * a * k * k * vol - 1.3 * a.powf(3.5) * vol / 3.5;
        assert!((prim.energy(&p) - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn pohozaev_from_energy_primitives() {
        let grid = GridSpec::<f64>::cubic(24, 10.0).unwrap();
        let ops = SpectralOps::new(&grid, ZeroMode::SphericalMean);
        let u = ComplexField::from_fn(&grid, |x| {
            Complex::new(
                (-x[0] * x[0] - 0.5 * x[1] * x[1]).exp(),
                0.3 * (-x[2] * x[2]).exp() * x[0],
            )
        });
        let p = params();
        let prim = Primitives::compute(&ops, &u, &p).unwrap();
        let e = prim.energy(&p);
        // reconstruct P from the energy's kinetic/power/nonlocal blocks
        let from_e =
            prim.kinetic - 1.5 * (0.5 * prim.kinetic - e - p.c2 / 4.0 * prim.nonlocal) * p.alpha - 0.75 * prim.nonlocal;
        let direct = pohozaev(&ops, &u, &p).unwrap();
        assert!((from_e - direct).abs() <= 1e-13 * direct.abs().max(prim.kinetic));
        assert_eq!(prim.lagrangian(&p), e + 0.5 * prim.mass);
    }

    #[test]
    fn regions() {
        let grid = GridSpec::<f64>::cubic(32, 16.0).unwrap();
        let u = ComplexField::from_real_fn(&grid, |x| {
            let r2 = x[1] * x[1] + x[2] * x[2];
            if r2 < 9.0 {
                1.0
            } else {
                0.0
            }
        });
        let outside = Region::parse("cylinder_outside(4)").unwrap();
        assert_eq!(lp_integral(&u, 4.0, outside), 0.0);
        let inside = Region::<f64>::parse("cylinder_inside(4)").unwrap();
        assert!(lp_integral(&u, 4.0, inside) > 0.0);
        assert!(Region::<f64>::parse("sphere(2)").is_err());
        assert!(Region::<f64>::parse("cylinder_inside(-1)").is_err());
        assert_eq!(Region::<f64>::parse("all").unwrap(), Region::All);
    }
}
