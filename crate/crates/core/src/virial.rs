//! Localized virial quantity `V(t) = ∫ρ|u|²` with `ρ = x1² + ψ_R(x_bar)`, its
//! exact first and second time derivatives, and the blow-up criterion.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{evolve, strang_step_signed, EvolveConfig, TrajectoryRecord, Verdict};
use crate::field::ComplexField;
use crate::functionals::{modulus_power, Primitives, SimParams};
use crate::grid::GridSpec;
use crate::ground_state::Certification;
use crate::scalar::Real;
use crate::spectral::SpectralOps;
use crate::symmetry::is_cylindrical;

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Unnormalized bump `exp(-1/((s-1)(2-s)))` on `(1, 2)`.
pub fn bump_raw(s: f64) -> f64 {
    let g = (s - 1.0) * (2.0 - s);
    if g <= 0.0 {
        0.0
    } else {
        (-1.0 / g).exp()
    }
}

const TABLE_INTERVALS: usize = 2048;

/// The normalized bump `η` and the cutoff `ψ(r) = r - ∫₀ʳ (r-s) η(s) ds`.
#[derive(Debug)]
pub struct MartelCutoff {
    /// `∫₁² exp(-1/((s-1)(2-s))) ds`
    pub raw_integral: f64,
    /// `F(r) = ∫₁ʳ η` at the table nodes.
    cumulative: Vec<f64>,
    /// `G(r) = ∫₁ʳ s η(s) ds` at the table nodes.
    first_moment: Vec<f64>,
}

impl MartelCutoff {
    fn build() -> Self {
        let h = 1.0 / TABLE_INTERVALS as f64;
        let node = |j: usize| 1.0 + j as f64 * h;
        let mut f_raw = vec![0.0; TABLE_INTERVALS + 1];
        let mut g_raw = vec![0.0; TABLE_INTERVALS + 1];
        for j in 0..TABLE_INTERVALS {
            let (a, b) = (node(j), node(j + 1));
            f_raw[j + 1] = f_raw[j] + adaptive_simpson(&bump_raw, a, b, 1e-19);
            g_raw[j + 1] = g_raw[j] + adaptive_simpson(&|s| s * bump_raw(s), a, b, 1e-19);
        }
        let c = f_raw[TABLE_INTERVALS];
        Self {
            raw_integral: c,
            cumulative: f_raw.iter().map(|v| v / c).collect(),
            first_moment: g_raw.iter().map(|v| v / c).collect(),
        }
    }

    /// Shared instance; the table is built once per process.
    pub fn get() -> &'static MartelCutoff {
        static CUTOFF: OnceLock<MartelCutoff> = OnceLock::new();
        CUTOFF.get_or_init(Self::build)
    }

    pub fn eta(&self, s: f64) -> f64 {
        bump_raw(s) / self.raw_integral
    }

    /// `(η, η', η'')` in closed form.
    pub fn eta_derivatives(&self, s: f64) -> (f64, f64, f64) {
        let g = (s - 1.0) * (2.0 - s);
        if g <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let e = self.eta(s);
        if e == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let dg = 3.0 - 2.0 * s;
        let ddg = -2.0;
        let dphi = dg / (g * g);
        let ddphi = (ddg * g - 2.0 * dg * dg) / (g * g * g);
        (e, e * dphi, e * (ddphi + dphi * dphi))
    }

    /// Cubic Hermite interpolation of a tabulated antiderivative with known slope.
    fn interpolate(&self, table: &[f64], slope: impl Fn(f64) -> f64, r: f64) -> f64 {
        let h = 1.0 / TABLE_INTERVALS as f64;
        let x = ((r - 1.0) / h).clamp(0.0, TABLE_INTERVALS as f64);
        let j = (x.floor() as usize).min(TABLE_INTERVALS - 1);
        let t = x - j as f64;
        let (a, b) = (1.0 + j as f64 * h, 1.0 + (j + 1) as f64 * h);
        let (ya, yb) = (table[j], table[j + 1]);
        let (ma, mb) = (slope(a) * h, slope(b) * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * ya + (t3 - 2.0 * t2 + t) * ma + (-2.0 * t3 + 3.0 * t2) * yb + (t3 - t2) * mb
    }

    fn cumulative_at(&self, r: f64) -> (f64, f64) {
        if r <= 1.0 {
            (0.0, 0.0)
        } else if r >= 2.0 {
            (self.cumulative[TABLE_INTERVALS], self.first_moment[TABLE_INTERVALS])
        } else {
            (
                self.interpolate(&self.cumulative, |s| self.eta(s), r),
                self.interpolate(&self.first_moment, |s| s * self.eta(s), r),
            )
        }
    }

    pub fn psi(&self, r: f64) -> f64 {
        let (f, g) = self.cumulative_at(r);
        r - r * f + g
    }

    pub fn psi_prime(&self, r: f64) -> f64 {
        1.0 - self.cumulative_at(r).0
    }

    pub fn psi_second(&self, r: f64) -> f64 {
        -self.eta(r)
    }

    /// SHA-256 of `(ψ, ψ')` at the table nodes, little-endian `f64`.
    pub fn table_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for j in 0..=TABLE_INTERVALS {
            let r = 1.0 + j as f64 / TABLE_INTERVALS as f64;
            hasher.update(self.psi(r).to_le_bytes());
            hasher.update(self.psi_prime(r).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `ψ_R = R² ψ(|x_bar|²/R²)` with the Martel cutoff.
    Martel,
    /// `ψ_R = |x_bar|²`, the unlocalized weight.
    Unlocalized,
}

/// Weight `ρ = x1² + ψ_R(x_bar)` and its derivatives sampled on a grid.
#[derive(Clone, Debug)]
pub struct LocalizationProfile<T> {
    pub kind: ProfileKind,
    pub radius: f64,
    grid: GridSpec<T>,
    pub psi_r: Vec<T>,
    pub rho: Vec<T>,
    /// `∇ρ`
    pub grad_rho: [Vec<T>; 3],
    /// Transverse Hessian of `ψ_R`: `(∂22, ∂23, ∂33)`.
    pub hessian_bar: [Vec<T>; 3],
    /// `Δ_bar ψ_R`
    pub laplacian_bar: Vec<T>,
    /// `Δ_bar² ψ_R`
    pub bilaplacian_bar: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub kind: ProfileKind,
    pub radius: f64,
    pub eta: String,
    pub normalization: f64,
    pub psi_table_sha256: String,
}

impl<T: Real> LocalizationProfile<T> {
    pub fn build(grid: &GridSpec<T>, radius: f64, kind: ProfileKind) -> Result<Self> {
        let half = grid.transverse_half_width().as_f64();
        if kind == ProfileKind::Martel && !(radius > 0.0 && radius < half / std::f64::consts::SQRT_2) {
            return Err(Error::Config(format!(
                "virial radius {radius} must lie in (0, {:.6}) for this box",
                half / std::f64::consts::SQRT_2
            )));
        }
        let cutoff = MartelCutoff::get();
        let total = grid.total();
        let mut psi_r = Vec::with_capacity(total);
        let mut rho = Vec::with_capacity(total);
        let mut grad: [Vec<T>; 3] = std::array::from_fn(|_| Vec::with_capacity(total));
        let mut hess: [Vec<T>; 3] = std::array::from_fn(|_| Vec::with_capacity(total));
        let mut lap = Vec::with_capacity(total);
        let mut bilap = Vec::with_capacity(total);
        let r2 = radius * radius;
        for idx in 0..total {
            let x = grid.point(idx).map(|v| v.as_f64());
            let s = x[1] * x[1] + x[2] * x[2];
            let (psi, dpsi, ddpsi_over_r2, lap_bar, bilap_bar) = match kind {
                ProfileKind::Unlocalized => (s, 1.0, 0.0, 4.0, 0.0),
                ProfileKind::Martel => {
                    let q = s / r2;
                    let (e, de, dde) = cutoff.eta_derivatives(q);
                    let dpsi = cutoff.psi_prime(q);
                    (
                        r2 * cutoff.psi(q),
                        dpsi,
                        -e / r2,
                        4.0 * dpsi - 4.0 * q * e,
                        -16.0 / r2 * (2.0 * e + 4.0 * q * de + q * q * dde),
                    )
                }
            };
            psi_r.push(T::lit(psi));
            rho.push(T::lit(x[0] * x[0] + psi));
            grad[0].push(T::lit(2.0 * x[0]));
            grad[1].push(T::lit(2.0 * x[1] * dpsi));
            grad[2].push(T::lit(2.0 * x[2] * dpsi));
            hess[0].push(T::lit(2.0 * dpsi + 4.0 * x[1] * x[1] * ddpsi_over_r2));
            hess[1].push(T::lit(4.0 * x[1] * x[2] * ddpsi_over_r2));
            hess[2].push(T::lit(2.0 * dpsi + 4.0 * x[2] * x[2] * ddpsi_over_r2));
            lap.push(T::lit(lap_bar));
            bilap.push(T::lit(bilap_bar));
        }
        Ok(Self {
            kind,
            radius,
            grid: grid.clone(),
            psi_r,
            rho,
            grad_rho: grad,
            hessian_bar: hess,
            laplacian_bar: lap,
            bilaplacian_bar: bilap,
        })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn summary(&self) -> ProfileSummary {
        let cutoff = MartelCutoff::get();
        ProfileSummary {
            kind: self.kind,
            radius: self.radius,
            eta: "exp(-1/((s-1)(2-s))) on (1,2), normalized".into(),
            normalization: cutoff.raw_integral,
            psi_table_sha256: cutoff.table_checksum(),
        }
    }

    fn check(&self, u: &ComplexField<T>) -> Result<()> {
        if self.grid.same_shape(u.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch("profile and field grids differ".into()))
        }
    }
}

/// `∫ρ|u|²`
pub fn virial_value<T: Real>(u: &ComplexField<T>, profile: &LocalizationProfile<T>) -> Result<T> {
    profile.check(u)?;
    let acc: T = u
        .values()
        .iter()
        .zip(&profile.rho)
        .map(|(v, r)| *r * v.norm_sqr())
        .sum();
    Ok(acc * u.grid().cell_volume())
}

/// `2 Im ∫ ∇ρ·∇u ū`
pub fn virial_first_derivative<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    profile: &LocalizationProfile<T>,
) -> Result<T> {
    profile.check(u)?;
    let grad = ops.gradient(u)?;
    Ok(first_derivative_from_gradient(u, &grad, profile))
}

fn first_derivative_from_gradient<T: Real>(
    u: &ComplexField<T>,
    grad: &[ComplexField<T>; 3],
    profile: &LocalizationProfile<T>,
) -> T {
    let mut acc = T::zero();
    for (ga, wa) in grad.iter().zip(&profile.grad_rho) {
        for ((g, v), w) in ga.values().iter().zip(u.values()).zip(wa) {
            acc += *w * (g * v.conj()).im;
        }
    }
    T::lit(2.0) * acc * u.grid().cell_volume()
}

/// The five labelled contributions to `d²V/dt²`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct VirialTerms {
    /// `8(‖∇u‖² - 3c1α/(2(α+2)) ∫|u|^{α+2})`
    pub leading: f64,
    /// `-∫Δ_bar²ψ_R |u|² - 4 Re∫((2I - ∇_bar²ψ_R)∇_bar u)·∇_bar ū`
    pub localization: f64,
    /// `2c1α/(α+2) ∫(4 - Δ_bar ψ_R)|u|^{α+2}`
    pub power_correction: f64,
    /// `2c2 ∫∇_bar ψ_R · ∇_bar(E1|u|²) |u|²`
    pub nonlocal_transverse: f64,
    /// `4c2 ∫x1 ∂1(E1|u|²) |u|²`
    pub nonlocal_axial: f64,
}

impl VirialTerms {
    pub fn sum(&self) -> f64 {
        self.leading + self.localization + self.power_correction + self.nonlocal_transverse + self.nonlocal_axial
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VirialReport {
    pub v: f64,
    pub dvdt_analytic: f64,
    pub d2v_rhs_exact: f64,
    pub terms: VirialTerms,
    pub d2v_fd: Option<f64>,
}

/// Evaluates `V`, `V'` and the exact identity for `V''` term by term.
pub fn virial_second_rhs<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    p: &SimParams<T>,
    profile: &LocalizationProfile<T>,
) -> Result<VirialReport> {
    profile.check(u)?;
    let grid = u.grid();
    let dv = grid.cell_volume();
    let two = T::lit(2.0);
    let grad = ops.gradient(u)?;
    let modsq = u.modulus_sq();
    let potential = ops.e1_real(&modsq);
    let grad_w = ops.gradient_real(&potential);
    let prim = Primitives::with_kinetic(ops, u, p, ops.h1dot_sq(u));
    let alpha = p.alpha;
    let exponent = alpha + two;

    let leading = T::lit(8.0) * (prim.kinetic - T::lit(3.0) * p.c1 * alpha / (two * exponent) * prim.power);

    let mut bilap = T::zero();
    let mut hessian_form = T::zero();
    let mut power_corr = T::zero();
    let mut transverse = T::zero();
    let mut axial = T::zero();
    for idx in 0..grid.total() {
        let m = modsq[idx];
        let x1 = grid.coordinate(0, grid.unravel(idx)[0]);
        let (d2, d3) = (grad[1].values()[idx], grad[2].values()[idx]);
        let (h22, h23, h33) = (
            profile.hessian_bar[0][idx],
            profile.hessian_bar[1][idx],
            profile.hessian_bar[2][idx],
        );
        // Re⟨(2I - H) v, v⟩ for v = (∂2u, ∂3u)
        let a = (two - h22) * d2.norm_sqr() + (two - h33) * d3.norm_sqr();
        let b = -h23 * two * (d2 * d3.conj()).re;
        hessian_form += a + b;
        bilap += profile.bilaplacian_bar[idx] * m;
        power_corr += (T::lit(4.0) - profile.laplacian_bar[idx]) * modulus_power(m, exponent);
        transverse += (profile.grad_rho[1][idx] * grad_w[1][idx] + profile.grad_rho[2][idx] * grad_w[2][idx]) * m;
        axial += x1 * grad_w[0][idx] * m;
    }
    let terms = VirialTerms {
        leading: leading.as_f64(),
        localization: (-(bilap + T::lit(4.0) * hessian_form) * dv).as_f64(),
        power_correction: (two * p.c1 * alpha / exponent * power_corr * dv).as_f64(),
        nonlocal_transverse: (two * p.c2 * transverse * dv).as_f64(),
        nonlocal_axial: (T::lit(4.0) * p.c2 * axial * dv).as_f64(),
    };
    let v: T = modsq.iter().zip(&profile.rho).map(|(m, r)| *m * *r).sum::<T>() * dv;
    Ok(VirialReport {
        v: v.as_f64(),
        dvdt_analytic: first_derivative_from_gradient(u, &grad, profile).as_f64(),
        d2v_rhs_exact: terms.sum(),
        terms,
        d2v_fd: None,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CipolattiReport {
    /// `2∫x·∇(E1 f) f`
    pub lhs: f64,
    /// `-3∫E1(f) f`
    pub rhs: f64,
    pub deviation: f64,
}

/// Compares `2∫x·∇(E1 f) f` with `-3∫E1(f) f` for real `f`.
pub fn cipolatti_identity_check<T: Real>(ops: &SpectralOps<T>, f: &ComplexField<T>) -> Result<CipolattiReport> {
    let grid = f.grid();
    if !ops.grid().same_shape(grid) {
        return Err(Error::GridMismatch("field and operators differ".into()));
    }
    let g = f.real_parts();
    let e1g = ops.e1_real(&g);
    let grad = ops.gradient_real(&e1g);
    let dv = grid.cell_volume();
    let mut lhs = T::zero();
    let mut rhs = T::zero();
    for idx in 0..grid.total() {
        let x = grid.point(idx);
        lhs += (x[0] * grad[0][idx] + x[1] * grad[1][idx] + x[2] * grad[2][idx]) * g[idx];
        rhs += e1g[idx] * g[idx];
    }
    let lhs = (T::lit(2.0) * lhs * dv).as_f64();
    let rhs = (T::lit(-3.0) * rhs * dv).as_f64();
    let scale = lhs.abs().max(rhs.abs());
    Ok(CipolattiReport {
        lhs,
        rhs,
        deviation: if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale },
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub s_u0: f64,
    pub s_g: f64,
    pub p_u0: f64,
    pub in_sigma1: bool,
    pub cylindrical_deviation: f64,
    pub alpha_in_window: bool,
    pub satisfied: bool,
    /// `S(G) - S(u0)`
    pub action_margin: f64,
    /// `-P(u0)`
    pub pohozaev_margin: f64,
}

/// Tests `S(u0) < S(G)`, `P(u0) < 0`, cylindrical symmetry and `α ∈ [4/3, 2]`.
pub fn criterion_check<T: Real>(
    ops: &SpectralOps<T>,
    u0: &ComplexField<T>,
    p: &SimParams<T>,
    cert: &Certification,
    cylindrical_tol: f64,
) -> Result<CriterionVerdict> {
    let prim = Primitives::compute(ops, u0, p)?;
    let s = prim.lagrangian(p).as_f64();
    let pz = prim.pohozaev(p).as_f64();
    let cyl = is_cylindrical(u0, cylindrical_tol);
    let window = p.alpha_in_window();
    Ok(CriterionVerdict {
        s_u0: s,
        s_g: cert.s_g,
        p_u0: pz,
        in_sigma1: cyl.cylindrical,
        cylindrical_deviation: cyl.deviation,
        alpha_in_window: window,
        satisfied: s < cert.s_g && pz < 0.0 && cyl.cylindrical && window,
        action_margin: cert.s_g - s,
        pohozaev_margin: -pz,
    })
}

/// One point of the finite-difference consistency study.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConsistencySample {
    pub dt: f64,
    pub d2v_fd: f64,
    pub d2v_rhs: f64,
    pub rel_error: f64,
}

/// `(V(+dt) - 2V(0) + V(-dt)) / dt²` from single Strang steps in both time
/// directions, against the identity evaluated at `u0`.
pub fn virial_time_consistency<T: Real>(
    ops: &SpectralOps<T>,
    u0: &ComplexField<T>,
    p: &SimParams<T>,
    profile: &LocalizationProfile<T>,
    dts: &[f64],
) -> Result<Vec<ConsistencySample>> {
    let rhs = virial_second_rhs(ops, u0, p, profile)?.d2v_rhs_exact;
    let v0 = virial_value(u0, profile)?.as_f64();
    let mut out = Vec::with_capacity(dts.len());
    for &dt in dts {
        let fwd = strang_step_signed(ops, u0, T::lit(dt), p)?;
        let bwd = strang_step_signed(ops, u0, T::lit(-dt), p)?;
        let vp = virial_value(&fwd, profile)?.as_f64();
        let vm = virial_value(&bwd, profile)?.as_f64();
        let fd = (vp - 2.0 * v0 + vm) / (dt * dt);
        out.push(ConsistencySample {
            dt,
            d2v_fd: fd,
            d2v_rhs: rhs,
            rel_error: (fd - rhs).abs() / rhs.abs(),
        });
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub verdict: Verdict,
    pub blowup_time_estimate: Option<f64>,
    /// Set when the evolution aborted on a conservation alarm.
    pub inconclusive: bool,
    pub abort_reason: Option<String>,
    pub rows: usize,
    pub d2v_negative_everywhere: bool,
    /// Largest `d²V/dt²` over the recorded times.
    pub d2v_sup: f64,
    /// `min_t -P(u(t)) / ‖u(t)‖²_{Ḣ¹}`
    pub epsilon_bar: f64,
    pub action_below_ground_state: bool,
    pub pohozaev_negative: bool,
    /// Fraction of interior samples where the divided second difference of `V` is negative.
    pub v_concave_fraction: f64,
    pub max_gradient_ratio: f64,
}

pub struct ConvexityOutcome {
    pub report: ConvexityReport,
    pub trajectory: TrajectoryRecord,
}

/// Fraction of interior points of `(t, v)` with negative divided second difference.
pub fn concave_fraction(t: &[f64], v: &[f64]) -> f64 {
    if t.len() < 3 {
        return 0.0;
    }
    let negative = (1..t.len() - 1)
        .filter(|&i| {
            let s1 = (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
            let s2 = (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
            s2 < s1
        })
        .count();
    negative as f64 / (t.len() - 2) as f64
}

/// Evolves data satisfying the blow-up criterion and audits the trajectory.
pub fn convexity_experiment<T: Real>(
    ops: &SpectralOps<T>,
    u0: &ComplexField<T>,
    p: &SimParams<T>,
    cert: &Certification,
    profile: &LocalizationProfile<T>,
    cfg: &EvolveConfig,
    cylindrical_tol: f64,
) -> Result<ConvexityOutcome> {
    let verdict = criterion_check(ops, u0, p, cert, cylindrical_tol)?;
    if !verdict.satisfied {
        return Err(Error::Precondition(format!(
            "initial data fail the blow-up criterion (S margin {:.4e}, P margin {:.4e}, cylindrical {}, alpha window {})",
            verdict.action_margin, verdict.pohozaev_margin, verdict.in_sigma1, verdict.alpha_in_window
        )));
    }
    let run = evolve(ops, u0, p, cfg, Some(profile))?;
    Ok(ConvexityOutcome {
        report: convexity_report(&run.record, cert.s_g),
        trajectory: run.record,
    })
}

/// Audits a trajectory recorded with a localization profile.
pub fn convexity_report(record: &TrajectoryRecord, s_g: f64) -> ConvexityReport {
    let rows = &record.rows;
    let d2v: Vec<f64> = rows.iter().filter_map(|r| r.d2v_rhs).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = rows.iter().filter_map(|r| r.virial_v).collect();
    ConvexityReport {
        verdict: record.verdict,
        blowup_time_estimate: record.blowup_time_estimate,
        inconclusive: record.verdict == Verdict::Aborted,
        abort_reason: record.abort_reason.clone(),
        rows: rows.len(),
        d2v_negative_everywhere: !d2v.is_empty() && d2v.iter().all(|&x| x < 0.0),
        d2v_sup: d2v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        epsilon_bar: rows
            .iter()
            .map(|r| -r.pohozaev / (r.h1dot * r.h1dot))
            .fold(f64::INFINITY, f64::min),
        action_below_ground_state: rows.iter().all(|r| r.lagrangian < s_g),
        pohozaev_negative: rows.iter().all(|r| r.pohozaev < 0.0),
        v_concave_fraction: if v.len() == t.len() {
            concave_fraction(&t, &v)
        } else {
            0.0
        },
        max_gradient_ratio: record.max_gradient_ratio,
    }
}
