//! Decay of `⟨E1^k f, g⟩` for separated supports, the cylindrical Strauss
//! embedding, and the `L²` bound of `E1^k`.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::functionals::{lp_integral, mass, Region};
use crate::grid::GridSpec;
use crate::scalar::Real;
use crate::spectral::SpectralOps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    E1,
    E1sq,
}

impl Operator {
    pub fn as_str(self) -> &'static str {
        match self {
            Operator::E1 => "E1",
            Operator::E1sq => "E1sq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "E1" | "e1" => Some(Operator::E1),
            "E1sq" | "e1sq" => Some(Operator::E1sq),
            _ => None,
        }
    }

    fn apply<T: Real>(self, ops: &SpectralOps<T>, f: &ComplexField<T>) -> Result<ComplexField<T>> {
        match self {
            Operator::E1 => ops.e1(f),
            Operator::E1sq => ops.e1_squared(f),
        }
    }
}

/// `exp(-1/(1-t²))` for `|t| < 1`.
pub fn ball_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayExperimentSpec {
    pub operator: Operator,
    /// Support radius of both bumps, in units of `R`.
    pub inner_radius_factor: f64,
    /// Transverse distance from the axis to the support of `f`, in units of `R`.
    pub outer_radius_factor: f64,
    pub r_values: Vec<f64>,
    /// Scale applied to `f` after `L¹` normalization.
    pub f_mass: f64,
    pub grid: GridSpec<f64>,
}

impl DecayExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let (g1, g2) = (self.inner_radius_factor, self.outer_radius_factor);
        if !(g1 > 0.0 && g2 > g1) {
            return Err(Error::Config(format!(
                "need 0 < gamma1 < gamma2, got gamma1={g1}, gamma2={g2}"
            )));
        }
        if self.r_values.len() < 4 {
            return Err(Error::Config("a decay fit needs at least 4 R values".into()));
        }
        if self.r_values.windows(2).any(|w| !(w[1] > w[0])) || self.r_values[0] <= 0.0 {
            return Err(Error::Config("R values must be positive and increasing".into()));
        }
        let r_max = *self.r_values.last().unwrap();
        let reach = (g2 + 2.0 * g1) * r_max;
        let h = self.grid.spacing(1);
        if reach > self.grid.len[1] / 2.0 - 2.0 * h {
            return Err(Error::Config(format!(
                "f extends to x2={reach}, beyond the box half-width {} minus two spacings",
                self.grid.len[1] / 2.0
            )));
        }
        if g1 * r_max > self.grid.len[0] / 2.0 - 2.0 * self.grid.spacing(0)
            || g1 * r_max > self.grid.len[2] / 2.0 - 2.0 * self.grid.spacing(2)
        {
            return Err(Error::Config("bump radius exceeds the box".into()));
        }
        if !(self.f_mass > 0.0) {
            return Err(Error::Config("f_mass must be positive".into()));
        }
        Ok(())
    }
}

/// `g` centred at the origin and `f` centred at `(0, (γ1+γ2)R, 0)`, both
/// `L¹`-normalized ball bumps of radius `γ1 R`; `f` lives in `|x_bar| >= γ2 R`.
pub fn decay_bumps(spec: &DecayExperimentSpec, r: f64) -> (ComplexField<f64>, ComplexField<f64>) {
    let grid = &spec.grid;
    let radius = spec.inner_radius_factor * r;
    let shift = (spec.inner_radius_factor + spec.outer_radius_factor) * r;
    let bump = |c: [f64; 3]| {
        let raw = ComplexField::from_real_fn(grid, |x| {
            let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
            ball_bump(d / radius)
        });
        let l1: f64 = raw.values().iter().map(|v| v.re).sum::<f64>() * grid.cell_volume();
        raw.scaled(1.0 / l1)
    };
    (bump([0.0, shift, 0.0]).scaled(spec.f_mass), bump([0.0; 3]))
}

/// `⟨E1^k f, g⟩` for real `f, g` with disjoint supports on the grid.
pub fn pairing(ops: &SpectralOps<f64>, op: Operator, f: &ComplexField<f64>, g: &ComplexField<f64>) -> Result<f64> {
    let overlap = f
        .values()
        .iter()
        .zip(g.values())
        .any(|(a, b)| a.norm_sqr() > 0.0 && b.norm_sqr() > 0.0);
    if overlap {
        return Err(Error::Precondition("supports of f and g overlap".into()));
    }
    Ok(op.apply(ops, f)?.inner(g)?.re)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub operator: Operator,
    pub gammas: [f64; 2],
    pub r_values: Vec<f64>,
    /// `|⟨E1^k f_R, g_R⟩|` per R.
    pub pairings: Vec<f64>,
    /// R values whose pairing fell below the noise floor.
    pub excluded: Vec<f64>,
    pub slope: f64,
    /// Half-width of the 95% confidence band of the slope.
    pub slope_ci: f64,
    pub monotone: bool,
}

/// Slope of the least-squares line through `(x, y)` and its 95% half-width.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, f64::INFINITY);
    }
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY);
    (slope, t * se)
}

pub fn pairing_decay_experiment(spec: &DecayExperimentSpec, ops: &SpectralOps<f64>) -> Result<DecayFit> {
    spec.validate()?;
    if !ops.grid().same_shape(&spec.grid) {
        return Err(Error::GridMismatch("operators and experiment grid differ".into()));
    }
    let floor = 1e3 * f64::EPSILON;
    let mut pairings = Vec::new();
    let mut kept = (Vec::new(), Vec::new());
    let mut excluded = Vec::new();
    for &r in &spec.r_values {
        let (f, g) = decay_bumps(spec, r);
        let value = pairing(ops, spec.operator, &f, &g)?.abs();
        pairings.push(value);
        if value < floor {
            excluded.push(r);
        } else {
            kept.0.push(r.ln());
            kept.1.push(value.ln());
        }
    }
    if kept.0.len() < 2 {
        return Err(Error::Precondition(
            "fewer than two pairings above the noise floor".into(),
        ));
    }
    let (slope, ci) = linear_fit(&kept.0, &kept.1);
    let above: Vec<f64> = pairings.iter().copied().filter(|v| *v >= floor).collect();
    Ok(DecayFit {
        operator: spec.operator,
        gammas: [spec.inner_radius_factor, spec.outer_radius_factor],
        r_values: spec.r_values.clone(),
        monotone: above.windows(2).all(|w| w[1] <= w[0]),
        pairings,
        excluded,
        slope,
        slope_ci: ci,
    })
}

/// Parameters of one random cylindrical field: a sum of Gaussian rings
/// `a exp(-(x1-b)²/(2s²)) exp(-(|x_bar|-r0)²/(2w²))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RingField {
    pub rings: Vec<[f64; 5]>,
}

impl RingField {
    /// Draws 1 to 3 rings with radii up to `r_max`, widths in `[w_min, 2.5 w_min]`.
    pub fn random(rng: &mut ChaCha8Rng, r_max: f64, w_min: f64) -> Self {
        let count = rng.random_range(1..=3);
        let rings = (0..count)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(1.0..3.0),
                    rng.random_range(0.0..r_max),
                    rng.random_range(w_min..2.5 * w_min),
                ]
            })
            .collect();
        Self { rings }
    }

    pub fn sample<T: Real>(&self, grid: &GridSpec<T>) -> ComplexField<T> {
        ComplexField::from_real_fn(grid, |x| {
            let x1 = x[0].as_f64();
            let r = (x[1] * x[1] + x[2] * x[2]).sqrt().as_f64();
            let v: f64 = self
                .rings
                .iter()
                .map(|[a, b, s, r0, w]| {
                    a * (-(x1 - b).powi(2) / (2.0 * s * s)).exp() * (-(r - r0).powi(2) / (2.0 * w * w)).exp()
                })
                .sum();
            T::lit(v)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StraussReport {
    pub samples: usize,
    pub radius: f64,
    /// `max ‖f‖⁴_{L⁴(|x_bar| >= R)} / ‖f‖²_{Ḣ¹}` at `M(f) = 1`.
    pub max_raw_ratio: f64,
    /// `R` times the raw ratio: the empirical embedding constant.
    pub embedding_constant: f64,
}

/// Random ring ensemble drawn from `rng`; the same generator state gives the
/// same continuous fields on any grid.
pub fn strauss_check<T: Real>(
    ops: &SpectralOps<T>,
    samples: usize,
    radius: f64,
    ensemble_radius: f64,
    ring_width: f64,
    rng: &mut ChaCha8Rng,
) -> Result<StraussReport> {
    let grid = ops.grid();
    let region = Region::CylinderOutside(T::lit(radius));
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let field = RingField::random(rng, ensemble_radius, ring_width).sample(grid);
        let m = mass(&field);
        if m == T::zero() {
            continue;
        }
        let f = field.scaled(T::one() / m.sqrt());
        let outer = lp_integral(&f, T::lit(4.0), region).as_f64();
        let kinetic = ops.h1dot_sq(&f).as_f64();
        if kinetic > 0.0 {
            worst = worst.max(outer / kinetic);
        }
    }
    Ok(StraussReport {
        samples,
        radius,
        max_raw_ratio: worst,
        embedding_constant: radius * worst,
    })
}

/// `max ‖E1^k f‖₂ / ‖f‖₂` over random complex fields.
pub fn l2_boundedness_probe<T: Real>(
    ops: &SpectralOps<T>,
    op: Operator,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let grid = ops.grid();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let f = ComplexField::from_fn(grid, |_| {
            Complex::new(T::lit(rng.random_range(-1.0..1.0)), T::lit(rng.random_range(-1.0..1.0)))
        });
        let ratio = (op.apply(ops, &f)?.l2_norm() / f.l2_norm()).as_f64();
        worst = worst.max(ratio);
    }
    Ok(worst)
}
