//! Standing-wave profiles: solutions of `-ΔQ + Q - c1|Q|^α Q - c2 E1(|Q|²) Q = 0`.

use num_complex::Complex;
use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::functionals::{modulus_power, Primitives, SimParams};
use crate::grid::GridSpec;
use crate::scalar::Real;
use crate::spectral::SpectralOps;
use crate::symmetry::{is_cylindrical, x1_parity_defect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Petviashvili,
    GradientFlow,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Petviashvili => "petviashvili",
            Method::GradientFlow => "gradient_flow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "petviashvili" => Some(Method::Petviashvili),
            "gradient_flow" => Some(Method::GradientFlow),
            _ => None,
        }
    }
}

/// Starting iterate.
#[derive(Clone, Debug)]
pub enum Seed<T> {
    /// `exp(-|x|²/2)`
    Gaussian,
    Field(ComplexField<T>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Petviashvili stabilizer exponent.
    pub theta: f64,
    /// Admissible range of the stabilizer (or Nehari scale for gradient flow).
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Consecutive residual increases treated as divergence.
    pub growth_limit: usize,
    /// Gradient-flow step in `(0, 1]`.
    pub relaxation: f64,
    /// Iterations between symmetry checks of the iterate (0 disables).
    pub symmetry_every: usize,
    pub symmetry_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            theta: 1.5,
            gamma_min: 1e-6,
            gamma_max: 1e6,
            growth_limit: 10,
            relaxation: 0.5,
            symmetry_every: 50,
            symmetry_tol: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    /// Petviashvili `γ` or the gradient-flow Nehari scale `t`.
    pub stabilizer: f64,
}

#[derive(Clone, Debug)]
pub struct GroundStateResult<T> {
    pub q: ComplexField<T>,
    pub residual_l2_rel: f64,
    pub iterations: usize,
    pub pohozaev_rel: f64,
    pub lagrangian_s: f64,
    pub converged: bool,
    pub method: Method,
    pub history: Vec<IterationRecord>,
    /// Why the iteration stopped without converging.
    pub failure: Option<String>,
    pub max_symmetry_deviation: f64,
}

impl<T: Real> GroundStateResult<T> {
    /// Stabilizer at the first iteration.
    pub fn initial_stabilizer(&self) -> Option<f64> {
        self.history.first().map(|r| r.stabilizer)
    }
}

/// Work buffers and the nonlinearity split into its two homogeneous parts.
struct Nonlinearity<T> {
    /// `c1 |Q|^α Q`
    local: Vec<Complex<T>>,
    /// `c2 E1(|Q|²) Q`
    nonlocal: Vec<Complex<T>>,
    /// `∫|Q|^{α+2}`
    power: T,
    /// `⟨E1|Q|², |Q|²⟩`
    pairing: T,
}

fn nonlinearity<T: Real>(ops: &SpectralOps<T>, q: &[Complex<T>], p: &SimParams<T>) -> Nonlinearity<T> {
    let dv = ops.grid().cell_volume();
    let rho: Vec<T> = q.iter().map(|v| v.norm_sqr()).collect();
    let potential = ops.e1_real(&rho);
    let mut local = Vec::with_capacity(q.len());
    let mut nonlocal = Vec::with_capacity(q.len());
    let mut power = T::zero();
    let mut pairing = T::zero();
    for ((v, &r), &w) in q.iter().zip(&rho).zip(&potential) {
        let a = modulus_power(r, p.alpha);
        local.push(*v * (p.c1 * a));
        nonlocal.push(*v * (p.c2 * w));
        power += a * r;
        pairing += w * r;
    }
    Nonlinearity {
        local,
        nonlocal,
        power: power * dv,
        pairing: pairing * dv,
    }
}

fn seed_values<T: Real>(grid: &GridSpec<T>, seed: &Seed<T>) -> Result<Vec<Complex<T>>> {
    let values = match seed {
        Seed::Gaussian => ComplexField::from_real_fn(grid, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / T::lit(2.0)).exp()
        }),
        Seed::Field(f) => {
            if !f.grid().same_shape(grid) {
                return Err(Error::GridMismatch("seed grid differs from solver grid".into()));
            }
            f.clone()
        }
    };
    if values.sup_norm() == T::zero() {
        return Err(Error::Precondition("seed is identically zero".into()));
    }
    if !values.is_finite() {
        return Err(Error::NonFinite("seed".into()));
    }
    Ok(values.into_values())
}

/// Rotates the phase so that the largest sample is real and positive.
fn normalize_phase<T: Real>(values: &mut [Complex<T>]) {
    let peak = values.iter().copied().fold(
        Complex::zero(),
        |a: Complex<T>, b| if b.norm_sqr() > a.norm_sqr() { b } else { a },
    );
    let norm = peak.norm();
    if norm > T::zero() {
        let rot = peak.conj() / norm;
        for v in values.iter_mut() {
            *v *= rot;
        }
    }
}

fn spectral_norm_sq<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm_sqr()).sum()
}

struct Monitor {
    growth: usize,
    last: f64,
    max_sym: f64,
}

impl Monitor {
    fn new() -> Self {
        Self {
            growth: 0,
            last: f64::INFINITY,
            max_sym: 0.0,
        }
    }

    /// Returns a failure message when the iteration should stop.
    fn observe(&mut self, residual: f64, stabilizer: f64, opts: &SolverOptions) -> Option<String> {
        if !residual.is_finite() || !stabilizer.is_finite() {
            return Some("non-finite iterate".into());
        }
        if !(opts.gamma_min..=opts.gamma_max).contains(&stabilizer) {
            return Some(format!(
                "stabilizer {stabilizer:.6e} left [{:.1e}, {:.1e}]",
                opts.gamma_min, opts.gamma_max
            ));
        }
        if residual > self.last {
            self.growth += 1;
        } else {
            self.growth = 0;
        }
        self.last = residual;
        if self.growth >= opts.growth_limit {
            return Some(format!("residual grew for {} consecutive steps", self.growth));
        }
        None
    }

    fn check_symmetry<T: Real>(
        &mut self,
        grid: &GridSpec<T>,
        values: &[Complex<T>],
        it: usize,
        opts: &SolverOptions,
    ) -> Option<String> {
        if opts.symmetry_every == 0 || !it.is_multiple_of(opts.symmetry_every) {
            return None;
        }
        let f = ComplexField::from_parts(grid.clone(), values.to_vec());
        let dev = is_cylindrical(&f, opts.symmetry_tol).deviation;
        self.max_sym = self.max_sym.max(dev);
        (dev > opts.symmetry_tol).then(|| format!("iterate lost cylindrical symmetry ({dev:.3e})"))
    }
}

fn validate_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.tol > 0.0 && opts.theta.is_finite() && opts.gamma_min > 0.0 && opts.gamma_max > opts.gamma_min) {
        return Err(Error::InvalidParams("solver tolerances".into()));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "relaxation {} outside (0, 1]",
            opts.relaxation
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    ops: &SpectralOps<T>,
    p: &SimParams<T>,
    mut values: Vec<Complex<T>>,
    method: Method,
    iterations: usize,
    residual: f64,
    converged: bool,
    history: Vec<IterationRecord>,
    failure: Option<String>,
    max_sym: f64,
) -> GroundStateResult<T> {
    normalize_phase(&mut values);
    let q = ComplexField::from_parts(ops.grid().clone(), values);
    let prim = Primitives::compute(ops, &q, p).expect("grid matches by construction");
    GroundStateResult {
        pohozaev_rel: (prim.pohozaev(p) / prim.kinetic).as_f64(),
        lagrangian_s: prim.lagrangian(p).as_f64(),
        q,
        residual_l2_rel: residual,
        iterations,
        converged,
        method,
        history,
        failure,
        max_symmetry_deviation: max_sym,
    }
}

/// Petviashvili iteration `Q <- γ^θ (1-Δ)⁻¹ N(Q)`, `γ = ⟨(1-Δ)Q,Q⟩ / ⟨N(Q),Q⟩`.
pub fn petviashvili_solve<T: Real>(
    ops: &SpectralOps<T>,
    p: &SimParams<T>,
    seed: &Seed<T>,
    opts: &SolverOptions,
) -> Result<GroundStateResult<T>> {
    validate_options(opts)?;
    let grid = ops.grid().clone();
    let symbol: Vec<T> = ops.k_squared().into_iter().map(|k| T::one() + k).collect();
    let mut q = seed_values(&grid, seed)?;
    let mut history = Vec::new();
    let mut monitor = Monitor::new();
    let theta = T::lit(opts.theta);
    let mut residual = f64::INFINITY;

    for it in 0..=opts.max_iter {
        let mut q_hat = q.clone();
        ops.forward_in_place(&mut q_hat);
        let nl = nonlinearity(ops, &q, p);
        let mut n_hat: Vec<Complex<T>> = nl.local.iter().zip(&nl.nonlocal).map(|(a, b)| a + b).collect();
        ops.forward_in_place(&mut n_hat);

        let linear: T = q_hat.iter().zip(&symbol).map(|(c, s)| *s * c.norm_sqr()).sum();
        let linear = linear * grid.cell_volume() / T::from_usize_lossy(grid.total());
        let pairing = p.c1 * nl.power + p.c2 * nl.pairing;
        if !(pairing > T::zero()) {
            return Err(Error::StabilizerUndefined(pairing.as_f64()));
        }
        let gamma = linear / pairing;
        let defect: T = q_hat
            .iter()
            .zip(&n_hat)
            .zip(&symbol)
            .map(|((a, b), s)| (*a * *s - b).norm_sqr())
            .sum();
        residual = (defect / spectral_norm_sq(&q_hat)).sqrt().as_f64();
        history.push(IterationRecord {
            iteration: it,
            residual,
            stabilizer: gamma.as_f64(),
        });
        if residual <= opts.tol {
            return Ok(finish(
                ops,
                p,
                q,
                Method::Petviashvili,
                it,
                residual,
                true,
                history,
                None,
                monitor.max_sym,
            ));
        }
        if it == opts.max_iter {
            break;
        }
        if let Some(msg) = monitor
            .observe(residual, gamma.as_f64(), opts)
            .or_else(|| monitor.check_symmetry(&grid, &q, it, opts))
        {
            return Ok(finish(
                ops,
                p,
                q,
                Method::Petviashvili,
                it,
                residual,
                false,
                history,
                Some(msg),
                monitor.max_sym,
            ));
        }
        let scale = gamma.powf(theta);
        for (v, s) in n_hat.iter_mut().zip(&symbol) {
            *v *= scale / *s;
        }
        ops.inverse_in_place(&mut n_hat);
        q = n_hat;
    }
    let msg = format!("iteration cap {} reached", opts.max_iter);
    Ok(finish(
        ops,
        p,
        q,
        Method::Petviashvili,
        opts.max_iter,
        residual,
        false,
        history,
        Some(msg),
        monitor.max_sym,
    ))
}

/// Positive root of `c1 t^α A + c2 t² B = K + M`.
fn nehari_scale<T: Real>(p: &SimParams<T>, target: T, power: T, pairing: T) -> Option<T> {
    let a = p.c1 * power;
    let b = p.c2 * pairing;
    let alpha = p.alpha;
    let f = |t: T| a * t.powf(alpha) + b * t * t - target;
    if !(a + b > T::zero()) {
        return None;
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    while f(hi) < T::zero() {
        hi *= T::lit(2.0);
        if hi > T::lit(1e12) {
            return None;
        }
    }
    let mut t = hi;
    for _ in 0..200 {
        let df = alpha * a * t.powf(alpha - T::one()) + T::lit(2.0) * b * t;
        let mut next = t - f(t) / df;
        if !(next > lo && next < hi) {
            next = (lo + hi) / T::lit(2.0);
        }
        if f(next) > T::zero() {
            hi = next;
        } else {
            lo = next;
        }
        if Float::abs(next - t) <= T::lit(4.0) * T::eps() * next {
            return Some(next);
        }
        t = next;
    }
    Some(t)
}

/// Nehari-projected, preconditioned relaxation on the action:
/// `Q <- t Q` with `⟨S'(tQ), tQ⟩ = 0`, then
/// `Q <- (1-τ) tQ + τ (1-Δ)⁻¹ N(tQ)`.
pub fn gradient_flow_solve<T: Real>(
    ops: &SpectralOps<T>,
    p: &SimParams<T>,
    seed: &Seed<T>,
    opts: &SolverOptions,
) -> Result<GroundStateResult<T>> {
    validate_options(opts)?;
    let grid = ops.grid().clone();
    let symbol: Vec<T> = ops.k_squared().into_iter().map(|k| T::one() + k).collect();
    let mut q = seed_values(&grid, seed)?;
    let mut history = Vec::new();
    let mut monitor = Monitor::new();
    let tau = T::lit(opts.relaxation);
    let mut residual = f64::INFINITY;
    let norm = grid.cell_volume() / T::from_usize_lossy(grid.total());

    for it in 0..=opts.max_iter {
        let mut q_hat = q.clone();
        ops.forward_in_place(&mut q_hat);
        let nl = nonlinearity(ops, &q, p);
        let linear: T = q_hat.iter().zip(&symbol).map(|(c, s)| *s * c.norm_sqr()).sum::<T>() * norm;
        let t = nehari_scale(p, linear, nl.power, nl.pairing)
            .ok_or_else(|| Error::StabilizerUndefined((p.c1 * nl.power + p.c2 * nl.pairing).as_f64()))?;
        let t_local = t.powf(p.alpha + T::one());
        let t_cubic = t * t * t;
        let mut n_hat: Vec<Complex<T>> = nl
            .local
            .iter()
            .zip(&nl.nonlocal)
            .map(|(a, b)| *a * t_local + *b * t_cubic)
            .collect();
        ops.forward_in_place(&mut n_hat);
        let defect: T = q_hat
            .iter()
            .zip(&n_hat)
            .zip(&symbol)
            .map(|((a, b), s)| (*a * (*s * t) - b).norm_sqr())
            .sum();
        residual = (defect / (spectral_norm_sq(&q_hat) * t * t)).sqrt().as_f64();
        history.push(IterationRecord {
            iteration: it,
            residual,
            stabilizer: t.as_f64(),
        });
        if residual <= opts.tol {
            let projected = q.iter().map(|v| *v * t).collect();
            return Ok(finish(
                ops,
                p,
                projected,
                Method::GradientFlow,
                it,
                residual,
                true,
                history,
                None,
                monitor.max_sym,
            ));
        }
        if it == opts.max_iter {
            break;
        }
        if let Some(msg) = monitor
            .observe(residual, t.as_f64(), opts)
            .or_else(|| monitor.check_symmetry(&grid, &q, it, opts))
        {
            return Ok(finish(
                ops,
                p,
                q,
                Method::GradientFlow,
                it,
                residual,
                false,
                history,
                Some(msg),
                monitor.max_sym,
            ));
        }
        for ((v, a), s) in n_hat.iter_mut().zip(&q_hat).zip(&symbol) {
            *v = *a * ((T::one() - tau) * t) + *v * (tau / *s);
        }
        ops.inverse_in_place(&mut n_hat);
        q = n_hat;
    }
    let msg = format!("iteration cap {} reached", opts.max_iter);
    Ok(finish(
        ops,
        p,
        q,
        Method::GradientFlow,
        opts.max_iter,
        residual,
        false,
        history,
        Some(msg),
        monitor.max_sym,
    ))
}

/// Petviashvili, falling back to the gradient flow when it does not converge.
pub fn solve<T: Real>(
    ops: &SpectralOps<T>,
    p: &SimParams<T>,
    seed: &Seed<T>,
    opts: &SolverOptions,
) -> Result<GroundStateResult<T>> {
    match petviashvili_solve(ops, p, seed, opts) {
        Ok(r) if r.converged => Ok(r),
        Ok(_) | Err(Error::StabilizerUndefined(_)) => gradient_flow_solve(ops, p, seed, opts),
        Err(e) => Err(e),
    }
}

/// `‖-ΔQ + Q - c1|Q|^α Q - c2 E1(|Q|²) Q‖₂ / ‖Q‖₂`, evaluated in physical space.
pub fn residual_l2_rel<T: Real>(ops: &SpectralOps<T>, q: &ComplexField<T>, p: &SimParams<T>) -> Result<T> {
    let lap = ops.laplacian(q)?;
    let rho = q.modulus_sq();
    let potential = ops.e1_real(&rho);
    let mut acc = T::zero();
    for (((v, l), &r), &w) in q.values().iter().zip(lap.values()).zip(&rho).zip(&potential) {
        let n = *v * (p.c1 * modulus_power(r, p.alpha) + p.c2 * w);
        acc += (*v - l - n).norm_sqr();
    }
    let denom = q.l2_norm();
    if denom == T::zero() {
        return Err(Error::Precondition("residual of the zero field".into()));
    }
    Ok((acc * q.grid().cell_volume()).sqrt() / denom)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CertifyTolerances {
    pub residual: f64,
    /// Bound on `|P(Q)| / ‖∇Q‖²`.
    pub pohozaev: f64,
    /// Bound on the relative Nehari pairing `⟨S'(Q),Q⟩ / (‖∇Q‖² + ‖Q‖²)`.
    pub nehari: f64,
    pub cylindrical: f64,
    pub parity: f64,
}

impl Default for CertifyTolerances {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            pohozaev: 5e-3,
            nehari: 1e-6,
            cylindrical: 1e-4,
            parity: 1e-8,
        }
    }
}

pub const MINIMALITY_CAVEAT: &str = "S(Q) of the computed profile is used as the ground-state action S(G); \
global minimality among all nontrivial solutions is not certified";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certification {
    pub residual_l2_rel: f64,
    pub pohozaev_rel: f64,
    pub nehari_rel: f64,
    pub cylindrical_deviation: f64,
    pub parity_defect: f64,
    /// Working threshold `S(G)`.
    pub s_g: f64,
    pub mass: f64,
    pub h1dot_sq: f64,
    pub global_minimality_certified: bool,
    pub caveat: String,
    pub tolerances: CertifyTolerances,
}

/// Re-measures a converged profile and checks it against `tol`.
pub fn certify<T: Real>(
    ops: &SpectralOps<T>,
    result: &GroundStateResult<T>,
    p: &SimParams<T>,
    tol: &CertifyTolerances,
) -> Result<Certification> {
    if !result.converged {
        return Err(Error::Precondition("cannot certify a non-converged profile".into()));
    }
    let q = &result.q;
    let residual = residual_l2_rel(ops, q, p)?.as_f64();
    let prim = Primitives::compute(ops, q, p)?;
    let pohozaev_rel = (prim.pohozaev(p) / prim.kinetic).as_f64();
    let nehari_rel = (prim.nehari(p) / (prim.kinetic + prim.mass)).as_f64();
    let cyl = is_cylindrical(q, tol.cylindrical);
    let parity = x1_parity_defect(q);
    let cert = Certification {
        residual_l2_rel: residual,
        pohozaev_rel,
        nehari_rel,
        cylindrical_deviation: cyl.deviation,
        parity_defect: parity,
        s_g: prim.lagrangian(p).as_f64(),
        mass: prim.mass.as_f64(),
        h1dot_sq: prim.kinetic.as_f64(),
        global_minimality_certified: false,
        caveat: MINIMALITY_CAVEAT.into(),
        tolerances: *tol,
    };
    let failures: Vec<String> = [
        (
            residual <= tol.residual,
            format!("residual {residual:.3e} > {:.1e}", tol.residual),
        ),
        (
            pohozaev_rel.abs() <= tol.pohozaev,
            format!("|P(Q)|/|∇Q|² {:.3e} > {:.1e}", pohozaev_rel.abs(), tol.pohozaev),
        ),
        (
            nehari_rel.abs() <= tol.nehari,
            format!("Nehari pairing {:.3e} > {:.1e}", nehari_rel.abs(), tol.nehari),
        ),
        (
            cyl.cylindrical,
            format!("cylindrical deviation {:.3e} > {:.1e}", cyl.deviation, tol.cylindrical),
        ),
        (
            parity <= tol.parity,
            format!("x1 parity defect {parity:.3e} > {:.1e}", tol.parity),
        ),
    ]
    .into_iter()
    .filter(|(ok, _)| !ok)
    .map(|(_, msg)| msg)
    .collect();
    if failures.is_empty() {
        Ok(cert)
    } else {
        Err(Error::CertificationFailed(failures.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ZeroMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SpectralOps<f64>, SimParams<f64>) {
        let grid = GridSpec::cubic(48, 16.0).unwrap();
        (
            SpectralOps::new(&grid, ZeroMode::SphericalMean),
            SimParams::new(1.0, 1.0, 2.0).unwrap(),
        )
    }

    fn converged(ops: &SpectralOps<f64>, p: &SimParams<f64>) -> GroundStateResult<f64> {
        let opts = SolverOptions {
            tol: 1e-10,
            ..Default::default()
        };
        petviashvili_solve(ops, p, &Seed::Gaussian, &opts).unwrap()
    }

    #[test]
    fn zero_seed_is_rejected() {
        let (ops, p) = setup();
        let seed = Seed::Field(ComplexField::zeros(ops.grid()));
        assert!(petviashvili_solve(&ops, &p, &seed, &SolverOptions::default()).is_err());
        assert!(gradient_flow_solve(&ops, &p, &seed, &SolverOptions::default()).is_err());
    }

    #[test]
    fn converged_profile_is_a_fixed_point() {
        let (ops, p) = setup();
        let gs = converged(&ops, &p);
        assert!(gs.converged, "{:?}", gs.failure);
        assert!(gs.residual_l2_rel <= 1e-8);
        let again = petviashvili_solve(&ops, &p, &Seed::Field(gs.q.clone()), &SolverOptions::default()).unwrap();
        assert!(again.converged);
        assert!(again.iterations <= 2, "{} iterations", again.iterations);
        assert!((again.initial_stabilizer().unwrap() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn solvers_agree_and_profile_certifies() {
        let (ops, p) = setup();
        let a = converged(&ops, &p);
        let opts = SolverOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let b = gradient_flow_solve(&ops, &p, &Seed::Gaussian, &opts).unwrap();
        assert!(b.converged);
        assert!(a.q.relative_distance(&b.q).unwrap() <= 1e-6);
        let tol = CertifyTolerances {
            pohozaev: 5e-2,
            cylindrical: 1e-3,
            ..Default::default()
        };
        let cert = certify(&ops, &a, &p, &tol).unwrap();
        assert!(!cert.global_minimality_certified);
        assert!(cert.nehari_rel.abs() <= 1e-6);
        assert!((cert.s_g - a.lagrangian_s).abs() <= 1e-12 * cert.s_g.abs());
    }

    #[test]
    fn certification_rejects_perturbed_profile_and_wrong_params() {
        let (ops, p) = setup();
        let gs = converged(&ops, &p);
        let tol = CertifyTolerances {
            pohozaev: 5e-2,
            cylindrical: 1e-3,
            ..Default::default()
        };
        let mut noisy = gs.clone();
        let scale = 0.1 * gs.q.sup_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in noisy.q.values_mut() {
            v.re += scale * rng.random_range(-0.5..0.5);
        }
        assert!(matches!(
            certify(&ops, &noisy, &p, &tol),
            Err(Error::CertificationFailed(_))
        ));
        let other = SimParams::new(1.0, 2.0, 2.0).unwrap();
        assert!(matches!(
            certify(&ops, &gs, &other, &tol),
            Err(Error::CertificationFailed(_))
        ));
        let mut unconverged = gs;
        unconverged.converged = false;
        assert!(matches!(
            certify(&ops, &unconverged, &p, &tol),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn solve_falls_back_when_petviashvili_stalls() {
        let (ops, p) = setup();
        let opts = SolverOptions {
            tol: 1e-9,
            max_iter: 3,
            ..Default::default()
        };
        let r = solve(&ops, &p, &Seed::Gaussian, &opts).unwrap();
        assert_eq!(r.method, Method::GradientFlow);
        assert!(!r.converged);
        assert!(r.failure.is_some());
    }
}
