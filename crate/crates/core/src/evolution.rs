//! Strang-split integration of `i u_t + Δu + c1|u|^α u + c2 E1(|u|²) u = 0`.

use num_complex::Complex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::functionals::{lp_integral, modulus_power, Primitives, Region, SimParams};
use crate::scalar::Real;
use crate::spectral::SpectralOps;
use crate::virial::{virial_second_rhs, LocalizationProfile};

/// `u <- F⁻¹ exp(-i|ξ|² dt) F u`
pub fn linear_substep<T: Real>(ops: &SpectralOps<T>, u: &ComplexField<T>, dt: T) -> Result<ComplexField<T>> {
    let mut data = u.values().to_vec();
    ops.forward_in_place(&mut data);
    apply_free_phase(ops, &mut data, dt);
    ops.inverse_in_place(&mut data);
    Ok(ComplexField::from_parts(u.grid().clone(), data))
}

fn apply_free_phase<T: Real>(ops: &SpectralOps<T>, coeffs: &mut [Complex<T>], dt: T) {
    ops.for_each_mode(|idx, k| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        coeffs[idx] *= Complex::from_polar(T::one(), -k2 * dt);
    });
}

fn nonlinear_in_place<T: Real>(ops: &SpectralOps<T>, data: &mut [Complex<T>], dt: T, p: &SimParams<T>) {
    let modsq: Vec<T> = data.iter().map(|v| v.norm_sqr()).collect();
    let potential = if p.c2 == T::zero() {
        vec![T::zero(); modsq.len()]
    } else {
        ops.e1_real(&modsq)
    };
    for ((v, &m), &w) in data.iter_mut().zip(&modsq).zip(&potential) {
        let phase = dt * (p.c1 * modulus_power(m, p.alpha) + p.c2 * w);
        *v *= Complex::from_polar(T::one(), phase);
    }
}

/// `u <- u exp(i dt (c1|u|^α + c2 E1(|u|²)))`, exact since the potential is real.
pub fn nonlinear_substep<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    dt: T,
    p: &SimParams<T>,
) -> Result<ComplexField<T>> {
    let mut data = u.values().to_vec();
    nonlinear_in_place(ops, &mut data, dt, p);
    Ok(ComplexField::from_parts(u.grid().clone(), data))
}

/// One Strang step; `dt` may be negative (backward in time).
pub fn strang_step_signed<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    dt: T,
    p: &SimParams<T>,
) -> Result<ComplexField<T>> {
    if !ops.grid().same_shape(u.grid()) {
        return Err(Error::GridMismatch("field and operators differ".into()));
    }
    let half = dt / T::lit(2.0);
    let mut data = u.values().to_vec();
    ops.forward_in_place(&mut data);
    apply_free_phase(ops, &mut data, half);
    ops.inverse_in_place(&mut data);
    nonlinear_in_place(ops, &mut data, dt, p);
    ops.forward_in_place(&mut data);
    apply_free_phase(ops, &mut data, half);
    ops.inverse_in_place(&mut data);
    let out = ComplexField::from_parts(u.grid().clone(), data);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite("numerical overflow in Strang step".into()))
    }
}

/// Half linear step, full nonlinear phase step, half linear step.
pub fn strang_step<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    dt: T,
    p: &SimParams<T>,
) -> Result<ComplexField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParams(format!("time step {dt} must be positive")));
    }
    strang_step_signed(ops, u, dt, p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt0: f64,
    pub t_max: f64,
    pub dt_min: f64,
    /// Blow-up needs `‖∇u‖ >= factor ‖∇u0‖`.
    pub grad_blowup_factor: f64,
    pub cfl_safety: f64,
    /// Steps between diagnostics rows.
    pub record_every: usize,
    pub mass_tol: f64,
    pub energy_tol: f64,
    /// Radius of the outer cylinder for the `l4_outer` column.
    pub l4_radius: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            t_max: 1.0,
            dt_min: 1e-5,
            grad_blowup_factor: 10.0,
            cfl_safety: 1.0,
            record_every: 10,
            mass_tol: 1e-8,
            energy_tol: 1e-6,
            l4_radius: None,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.dt_min > 0.0 && self.dt0 > self.dt_min) {
            return bad("need dt0 > dt_min > 0");
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be finite and nonnegative");
        }
        if !(self.grad_blowup_factor > 1.0) {
            return bad("grad_blowup_factor must exceed 1");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl_safety must lie in (0, 1]");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        if !(self.mass_tol > 0.0 && self.energy_tol > 0.0) {
            return bad("conservation tolerances must be positive");
        }
        Ok(())
    }

    /// `clamp(cfl dt0 ‖∇u0‖/‖∇u‖, dt_min, dt0)`
    pub fn step_for(&self, k0: f64, k: f64) -> f64 {
        if k0 <= 0.0 || k <= 0.0 {
            return self.dt0;
        }
        (self.cfl_safety * self.dt0 * (k0 / k).sqrt()).clamp(self.dt_min, self.dt0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    pub lagrangian: f64,
    pub pohozaev: f64,
    /// `‖u‖_{Ḣ¹}`
    pub h1dot: f64,
    /// `‖u‖⁴_{L⁴(|x_bar| >= R)}`
    pub l4_outer: Option<f64>,
    pub virial_v: Option<f64>,
    pub virial_dvdt_analytic: Option<f64>,
    pub virial_dvdt_fd: Option<f64>,
    pub d2v_rhs: Option<f64>,
}

impl DiagnosticsRow {
    pub const CSV_HEADER: &'static str =
        "t,dt,mass,energy,lagrangian,pohozaev,h1dot,l4_outer,virial_V,virial_dVdt_analytic,virial_dVdt_fd,d2V_rhs";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{},{}",
            self.t,
            self.dt,
            self.mass,
            self.energy,
            self.lagrangian,
            self.pohozaev,
            self.h1dot,
            opt(self.l4_outer),
            opt(self.virial_v),
            opt(self.virial_dvdt_analytic),
            opt(self.virial_dvdt_fd),
            opt(self.d2v_rhs)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    BlowupDetected,
    Aborted,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::BlowupDetected => "blowup_detected",
            Verdict::Aborted => "aborted",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub rows: Vec<DiagnosticsRow>,
    pub verdict: Verdict,
    pub blowup_time_estimate: Option<f64>,
    pub abort_reason: Option<String>,
    pub steps: usize,
    /// Largest `‖∇u(t)‖ / ‖∇u0‖` seen at any step.
    pub max_gradient_ratio: f64,
}

impl TrajectoryRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DiagnosticsRow::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

pub struct Evolution<T: Real> {
    pub record: TrajectoryRecord,
    pub final_state: ComplexField<T>,
}

#[allow(clippy::too_many_arguments)]
fn diagnostics<T: Real>(
    ops: &SpectralOps<T>,
    u: &ComplexField<T>,
    kinetic: T,
    t: f64,
    dt: f64,
    p: &SimParams<T>,
    cfg: &EvolveConfig,
    profile: Option<&LocalizationProfile<T>>,
) -> Result<DiagnosticsRow> {
    let prim = Primitives::with_kinetic(ops, u, p, kinetic);
    let energy = prim.energy(p);
    let outer_radius = cfg.l4_radius.or(profile.map(|pr| pr.radius));
    let virial = profile.map(|pr| virial_second_rhs(ops, u, p, pr)).transpose()?;
    Ok(DiagnosticsRow {
        t,
        dt,
        mass: prim.mass.as_f64(),
        energy: energy.as_f64(),
        lagrangian: (energy + T::lit(0.5) * prim.mass).as_f64(),
        pohozaev: prim.pohozaev(p).as_f64(),
        h1dot: kinetic.sqrt().as_f64(),
        l4_outer: outer_radius.map(|r| lp_integral(u, T::lit(4.0), Region::CylinderOutside(T::lit(r))).as_f64()),
        virial_v: virial.map(|v| v.v),
        virial_dvdt_analytic: virial.map(|v| v.dvdt_analytic),
        virial_dvdt_fd: None,
        d2v_rhs: virial.map(|v| v.d2v_rhs_exact),
    })
}

/// Three-point derivative of `V` on the (possibly non-uniform) record times.
fn fill_virial_fd(rows: &mut [DiagnosticsRow]) {
    for i in 1..rows.len().saturating_sub(1) {
        let (a, b, c) = (rows[i - 1], rows[i], rows[i + 1]);
        if let (Some(va), Some(vb), Some(vc)) = (a.virial_v, b.virial_v, c.virial_v) {
            let (h1, h2) = (b.t - a.t, c.t - b.t);
            let d = -h2 / (h1 * (h1 + h2)) * va + (h2 - h1) / (h1 * h2) * vb + h1 / (h2 * (h1 + h2)) * vc;
            rows[i].virial_dvdt_fd = Some(d);
        }
    }
}

/// Runs the adaptive Strang integrator from `u0` up to `cfg.t_max`.
///
/// `observer` sees every recorded state with its row index.
pub fn evolve_with<T: Real>(
    ops: &SpectralOps<T>,
    u0: &ComplexField<T>,
    p: &SimParams<T>,
    cfg: &EvolveConfig,
    profile: Option<&LocalizationProfile<T>>,
    observer: &mut dyn FnMut(usize, &ComplexField<T>) -> Result<()>,
) -> Result<Evolution<T>> {
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial data".into()));
    }
    if !ops.grid().same_shape(u0.grid()) {
        return Err(Error::GridMismatch("initial data and operators differ".into()));
    }
    let grid = u0.grid().clone();
    let k0 = ops.h1dot_sq(u0).as_f64();
    let first = diagnostics(ops, u0, T::lit(k0), 0.0, 0.0, p, cfg, profile)?;
    let (m0, e0) = (first.mass, first.energy);
    let mut rows = vec![first];
    observer(0, u0)?;

    let mut coeffs = u0.values().to_vec();
    ops.forward_in_place(&mut coeffs);
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut max_ratio = 1.0f64;
    let mut verdict = Verdict::Completed;
    let mut blowup_time = None;
    let mut abort_reason = None;
    let mut last_state = u0.clone();
    let time_eps = 1e-12 * cfg.t_max.max(1.0);

    let mut dt = cfg.step_for(k0, k0).min(cfg.t_max);
    if cfg.t_max > 0.0 {
        apply_free_phase(ops, &mut coeffs, T::lit(dt / 2.0));
    }
    while t < cfg.t_max - time_eps {
        let mut data = coeffs.clone();
        ops.inverse_in_place(&mut data);
        nonlinear_in_place(ops, &mut data, T::lit(dt), p);
        ops.forward_in_place(&mut data);
        let kinetic = ops.h1dot_sq_from_coefficients(&data).as_f64();
        let finite = kinetic.is_finite() && data.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        if !finite {
            let growing = rows.len() >= 3
                && rows.windows(2).rev().take(2).all(|w| w[1].h1dot > w[0].h1dot)
                && rows.last().map(|r| r.h1dot * r.h1dot > k0).unwrap_or(false);
            if growing {
                verdict = Verdict::BlowupDetected;
                blowup_time = Some(t);
            } else {
                verdict = Verdict::Aborted;
                abort_reason = Some(format!("numerical overflow at t={t:.6e} without prior gradient growth"));
            }
            break;
        }
        coeffs = data;
        t += dt;
        steps += 1;
        let ratio = (kinetic / k0).sqrt();
        max_ratio = max_ratio.max(ratio);
        let at_floor = dt <= cfg.dt_min * (1.0 + 1e-12);
        let blowup = ratio >= cfg.grad_blowup_factor && at_floor;
        let done = t >= cfg.t_max - time_eps;

        if blowup || done || steps.is_multiple_of(cfg.record_every) {
            let mut sync = coeffs.clone();
            apply_free_phase(ops, &mut sync, T::lit(dt / 2.0));
            ops.inverse_in_place(&mut sync);
            let state = ComplexField::from_parts(grid.clone(), sync);
            let row = diagnostics(ops, &state, T::lit(kinetic), t, dt, p, cfg, profile)?;
            let mass_drift = (row.mass - m0).abs() / m0.max(f64::MIN_POSITIVE);
            let energy_drift = (row.energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE);
            rows.push(row);
            observer(rows.len() - 1, &state)?;
            last_state = state;
            if blowup {
                verdict = Verdict::BlowupDetected;
                blowup_time = Some(t);
                break;
            }
            if mass_drift > cfg.mass_tol || energy_drift > cfg.energy_tol {
                verdict = Verdict::Aborted;
                abort_reason = Some(format!(
                    "conservation alarm at t={t:.6e}: mass drift {mass_drift:.3e}, energy drift {energy_drift:.3e}"
                ));
                break;
            }
        }
        if done {
            break;
        }
        let next = cfg.step_for(k0, kinetic).min(cfg.t_max - t);
        apply_free_phase(ops, &mut coeffs, T::lit((dt + next) / 2.0));
        dt = next;
    }
    if verdict == Verdict::Completed && rows.last().map(|r| r.t) != Some(t) {
        let mut sync = coeffs.clone();
        apply_free_phase(ops, &mut sync, T::lit(dt / 2.0));
        ops.inverse_in_place(&mut sync);
        last_state = ComplexField::from_parts(grid.clone(), sync);
    }
    fill_virial_fd(&mut rows);
    Ok(Evolution {
        record: TrajectoryRecord {
            times: rows.iter().map(|r| r.t).collect(),
            rows,
            verdict,
            blowup_time_estimate: blowup_time,
            abort_reason,
            steps,
            max_gradient_ratio: max_ratio,
        },
        final_state: last_state,
    })
}

pub fn evolve<T: Real>(
    ops: &SpectralOps<T>,
    u0: &ComplexField<T>,
    p: &SimParams<T>,
    cfg: &EvolveConfig,
    profile: Option<&LocalizationProfile<T>>,
) -> Result<Evolution<T>> {
    evolve_with(ops, u0, p, cfg, profile, &mut |_, _| Ok(()))
}

/// Order estimate `log2(e(dt)/e(dt/2))` averaged over a halving ladder.
pub fn halving_order(errors: &[f64]) -> f64 {
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    orders.iter().sum::<f64>() / orders.len() as f64
}
