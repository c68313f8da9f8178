//! Subcommand drivers. Each returns a JSON summary for the manifest.

use dslab::decay::{l2_boundedness_probe, pairing_decay_experiment, strauss_check, DecayFit, Operator, StraussReport};
use dslab::evolution::{evolve_with, halving_order};
use dslab::functionals::{Primitives, SimParams};
use dslab::ground_state::{
    certify, gradient_flow_solve, petviashvili_solve, solve, Certification, GroundStateResult, Method, Seed,
};
use dslab::snapshot;
use dslab::virial::{
    cipolatti_identity_check, convexity_report, criterion_check, virial_second_rhs, virial_time_consistency,
    LocalizationProfile,
};
use dslab::{symbol_identity_check, Field, Grid, Params, Spectral};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::failure::Failure;
use crate::output::RunDir;

/// Sub-stream indices of the seeded generator.
const STREAM_ADJOINT: u64 = 1;
const STREAM_L2_PROBE: u64 = 2;
const STREAM_STRAUSS: u64 = 3;

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One named pass/fail comparison in a report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("<= {limit:e}"),
            pass: value <= limit,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("[{lo}, {hi}]"),
            pass: lo <= value && value <= hi,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!(">= {limit}"),
            pass: value >= limit,
        }
    }

    pub fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("> {limit}"),
            pass: value > limit,
        }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            limit: "true".into(),
            pass,
        }
    }
}

fn verdict_of(checks: &[Check]) -> Result<(), Failure> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn operators(cfg: &Config) -> Result<(Grid, Spectral, Params), Failure> {
    let grid = cfg.grid()?;
    let ops = Spectral::new(&grid, cfg.zero_mode()?);
    Ok((grid, ops, cfg.params()?))
}

fn initial_seed(cfg: &Config, grid: &Grid, run: Option<&mut RunDir>) -> Result<Seed<f64>, Failure> {
    let Some(path) = cfg.initial_snapshot() else {
        return Ok(Seed::Gaussian);
    };
    let bytes = std::fs::read(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let field: Field = snapshot::decode(&bytes)?;
    if !field.grid().same_shape(grid) {
        return Err(Failure::Config(format!(
            "snapshot {} does not match the configured grid",
            path.display()
        )));
    }
    if let Some(run) = run {
        run.record_input(&path)?;
    }
    Ok(Seed::Field(field))
}

fn run_solver(cfg: &Config, ops: &Spectral, p: &Params, seed: &Seed<f64>) -> Result<GroundStateResult<f64>, Failure> {
    let opts = cfg.solver_options()?;
    let result = match cfg.method()? {
        None => solve(ops, p, seed, &opts),
        Some(Method::Petviashvili) => petviashvili_solve(ops, p, seed, &opts),
        Some(Method::GradientFlow) => gradient_flow_solve(ops, p, seed, &opts),
    };
    result.map_err(|e| match e {
        dslab::Error::Precondition(m) | dslab::Error::NonFinite(m) => Failure::Check(m),
        other => other.into(),
    })
}

fn result_summary(r: &GroundStateResult<f64>) -> Value {
    json!({
        "converged": r.converged,
        "method": r.method.as_str(),
        "iterations": r.iterations,
        "residual_l2_rel": r.residual_l2_rel,
        "pohozaev_rel": r.pohozaev_rel,
        "lagrangian_s": r.lagrangian_s,
        "initial_stabilizer": r.initial_stabilizer(),
        "max_symmetry_deviation": r.max_symmetry_deviation,
        "failure": r.failure,
    })
}

fn certified(cfg: &Config, ops: &Spectral, p: &Params, res: &GroundStateResult<f64>) -> Result<Certification, Failure> {
    if !res.converged {
        return Err(Failure::Check(format!(
            "ground state did not converge: {}",
            res.failure.as_deref().unwrap_or("unknown reason")
        )));
    }
    Ok(certify(ops, res, p, &cfg.certify_tolerances()?)?)
}

/// Solves and certifies the ground state used as `S(G)` and as initial-data template.
fn certified_ground_state(
    cfg: &Config,
    ops: &Spectral,
    p: &Params,
    run: Option<&mut RunDir>,
) -> Result<(GroundStateResult<f64>, Certification), Failure> {
    let seed = initial_seed(cfg, ops.grid(), run)?;
    let res = run_solver(cfg, ops, p, &seed)?;
    let cert = certified(cfg, ops, p, &res)?;
    Ok((res, cert))
}

fn history_csv(r: &GroundStateResult<f64>) -> String {
    let mut out = String::from("iteration,residual,stabilizer\n");
    for h in &r.history {
        out.push_str(&format!("{},{:.17e},{:.17e}\n", h.iteration, h.residual, h.stabilizer));
    }
    out
}

pub fn ground_state(cfg: &Config, run: &mut RunDir) -> Result<Value, Failure> {
    let (grid, ops, p) = operators(cfg)?;
    let seed = initial_seed(cfg, &grid, Some(run))?;
    let res = run_solver(cfg, &ops, &p, &seed)?;
    run.write_bytes("q.ds3f", &snapshot::encode(&res.q))?;
    run.write_text("history.csv", &history_csv(&res))?;
    let summary = result_summary(&res);
    let outcome = certified(cfg, &ops, &p, &res);
    let report = json!({
        "result": summary,
        "certification": outcome.as_ref().ok(),
        "certification_failure": outcome.as_ref().err().map(|f| f.message().to_string()),
    });
    run.write_json("ground_state.json", &report)?;
    let cert = outcome?;
    let mut summary = summary;
    summary["s_g_caveat"] = cert.caveat.into();
    Ok(summary)
}

pub fn ground_state_task(cfg: &Config) -> Result<Value, Failure> {
    let (_, ops, p) = operators(cfg)?;
    let res = run_solver(cfg, &ops, &p, &Seed::Gaussian)?;
    let cert = certified(cfg, &ops, &p, &res);
    Ok(json!({
        "ground_state": result_summary(&res),
        "certified": cert.is_ok(),
        "certification_failure": cert.err().map(|f| f.message().to_string()),
    }))
}

fn build_profile(cfg: &Config, grid: &Grid) -> Result<LocalizationProfile<f64>, Failure> {
    Ok(LocalizationProfile::build(
        grid,
        cfg.virial_radius()?,
        cfg.profile_kind()?,
    )?)
}

pub fn evolve(cfg: &Config, run: &mut RunDir) -> Result<Value, Failure> {
    let (grid, ops, p) = operators(cfg)?;
    let (gs, cert) = certified_ground_state(cfg, &ops, &p, Some(run))?;
    let gamma = cfg.gamma_scale()?;
    let u0 = gs.q.scaled(gamma);
    let profile = if cfg.bool("virial.enabled")? {
        Some(build_profile(cfg, &grid)?)
    } else {
        None
    };
    let verdict = criterion_check(&ops, &u0, &p, &cert, cert.tolerances.cylindrical)?;
    run.write_json("criterion.json", &json!({ "gamma_scale": gamma, "verdict": verdict }))?;
    let convexity = cfg.bool("evolve.convexity")?;
    if (cfg.bool("evolve.require_criterion")? || convexity) && !verdict.satisfied {
        return Err(Failure::Criterion(format!(
            "blow-up criterion not satisfied: S(u0)={:.6e} vs S(G)={:.6e}, P(u0)={:.6e}, cylindrical={}, alpha window={}",
            verdict.s_u0, verdict.s_g, verdict.p_u0, verdict.in_sigma1, verdict.alpha_in_window
        )));
    }
    if convexity && profile.is_none() {
        return Err(Failure::Config("evolve.convexity needs virial.enabled=true".into()));
    }

    let ecfg = cfg.evolve_config()?;
    let every = cfg.usize("evolve.snapshot_every")?;
    let mut snapshots = Vec::new();
    let snap_dir = run.path("snapshots");
    let ev = evolve_with(&ops, &u0, &p, &ecfg, profile.as_ref(), &mut |row, u| {
        if every > 0 && row % every == 0 {
            std::fs::create_dir_all(&snap_dir)?;
            let rel = format!("snapshots/u_{row:06}.ds3f");
            std::fs::write(snap_dir.join(format!("u_{row:06}.ds3f")), snapshot::encode(u))?;
            snapshots.push(rel);
        }
        Ok(())
    })?;
    for rel in &snapshots {
        run.track(rel);
    }
    let record = ev.record;
    run.write_text("diagnostics.csv", &record.to_csv())?;
    let mut summary = json!({
        "verdict": record.verdict.as_str(),
        "blowup_time_estimate": record.blowup_time_estimate,
        "abort_reason": record.abort_reason,
        "steps": record.steps,
        "rows": record.rows.len(),
        "t_final": record.times.last(),
        "max_gradient_ratio": record.max_gradient_ratio,
        "gamma_scale": gamma,
        "criterion_satisfied": verdict.satisfied,
        "s_g": cert.s_g,
        "s_g_caveat": cert.caveat,
        "profile": profile.as_ref().map(|pr| pr.summary()),
    });
    if convexity {
        let report = convexity_report(&record, cert.s_g);
        run.write_json("convexity.json", &report)?;
        summary["convexity"] = serde_json::to_value(&report)?;
    }
    run.write_json("trajectory.json", &summary)?;
    Ok(summary)
}

pub fn blowup_task(cfg: &Config) -> Result<Value, Failure> {
    let (grid, ops, p) = operators(cfg)?;
    let (gs, cert) = certified_ground_state(cfg, &ops, &p, None)?;
    let u0 = gs.q.scaled(cfg.gamma_scale()?);
    let profile = if cfg.bool("virial.enabled")? {
        Some(build_profile(cfg, &grid)?)
    } else {
        None
    };
    let verdict = criterion_check(&ops, &u0, &p, &cert, cert.tolerances.cylindrical)?;
    let ev = evolve_with(&ops, &u0, &p, &cfg.evolve_config()?, profile.as_ref(), &mut |_, _| {
        Ok(())
    })?;
    let record = ev.record;
    Ok(json!({
        "criterion": verdict,
        "s_g_caveat": cert.caveat,
        "verdict": record.verdict.as_str(),
        "blowup_time_estimate": record.blowup_time_estimate,
        "abort_reason": record.abort_reason,
        "steps": record.steps,
        "max_gradient_ratio": record.max_gradient_ratio,
    }))
}

pub fn virial_check(cfg: &Config, run: &mut RunDir) -> Result<Value, Failure> {
    let (grid, ops, p) = operators(cfg)?;
    let (gs, _) = certified_ground_state(cfg, &ops, &p, Some(run))?;
    let gamma = cfg.gamma_scale()?;
    let u0 = gs.q.scaled(gamma);
    let profile = build_profile(cfg, &grid)?;
    let (ladder, fine) = cfg.virial_ladder()?;
    let mut dts = ladder.clone();
    dts.push(fine);
    let samples = virial_time_consistency(&ops, &u0, &p, &profile, &dts)?;
    let errors: Vec<f64> = samples[..ladder.len()].iter().map(|s| s.rel_error).collect();
    let order = halving_order(&errors);
    let fine_error = samples.last().map(|s| s.rel_error).unwrap_or(f64::NAN);
    let order_tol = cfg.f64("virial_check.order_tol")?;
    let checks = vec![
        Check::within("temporal_order", order, 2.0 - order_tol, 2.0 + order_tol),
        Check::at_most("rel_error_at_final_dt", fine_error, cfg.f64("virial_check.rel_tol")?),
    ];
    let at_ground_state = virial_second_rhs(&ops, &gs.q, &p, &profile)?;
    let kinetic = ops.h1dot_sq(&gs.q);
    let report = json!({
        "gamma_scale": gamma,
        "profile": profile.summary(),
        "samples": samples,
        "order": order,
        "final_dt": fine,
        "final_rel_error": fine_error,
        "ground_state_identity": {
            "terms": at_ground_state.terms,
            "sum": at_ground_state.d2v_rhs_exact,
            "sum_over_kinetic": at_ground_state.d2v_rhs_exact.abs() / kinetic,
        },
        "checks": checks,
    });
    run.write_json("virial_check.json", &report)?;
    verdict_of(&checks)?;
    Ok(json!({ "order": order, "final_rel_error": fine_error }))
}

fn fit_json(fit: &DecayFit) -> Value {
    json!({
        "operator": fit.operator.as_str(),
        "gammas": fit.gammas,
        "R_values": fit.r_values,
        "pairings": fit.pairings,
        "excluded": fit.excluded,
        "slope": fit.slope,
        "ci": fit.slope_ci,
        "monotone": fit.monotone,
    })
}

pub fn decay_fits(cfg: &Config) -> Result<Vec<DecayFit>, Failure> {
    let mut fits = Vec::new();
    let mut ops: Option<Spectral> = None;
    for op in cfg.decay_operators()? {
        let spec = cfg.decay_spec(op)?;
        let ops = ops.get_or_insert_with(|| Spectral::new(&spec.grid, dslab::ZeroMode::SphericalMean));
        fits.push(pairing_decay_experiment(&spec, ops)?);
    }
    Ok(fits)
}

pub fn decay_checks(cfg: &Config, fits: &[DecayFit]) -> Result<Vec<Check>, Failure> {
    let tol = cfg.f64("decay.slope_tol")?;
    let mut checks = Vec::new();
    for fit in fits {
        let name = fit.operator.as_str();
        checks.push(Check::within(
            &format!("{name}_slope"),
            fit.slope,
            -3.0 - tol,
            -3.0 + tol,
        ));
        checks.push(Check::flag(&format!("{name}_monotone"), fit.monotone));
    }
    Ok(checks)
}

pub fn decay_task(cfg: &Config) -> Result<Value, Failure> {
    let fits = decay_fits(cfg)?;
    let checks = decay_checks(cfg, &fits)?;
    Ok(json!({ "fits": fits.iter().map(fit_json).collect::<Vec<_>>(), "checks": checks }))
}

#[derive(Serialize)]
pub struct StraussRun {
    pub n: usize,
    pub reports: Vec<StraussReport>,
}

pub fn strauss_runs(cfg: &Config) -> Result<Vec<StraussRun>, Failure> {
    let samples = cfg.usize("strauss.samples")?;
    let radii = cfg.list("strauss.R")?;
    let len = cfg.f64("strauss.L")?;
    let mut sizes = vec![cfg.usize("strauss.n")?];
    let fine = cfg.usize("strauss.n_fine")?;
    if fine > 0 {
        sizes.push(fine);
    }
    let seed = cfg.seed()?;
    let mut runs = Vec::new();
    for n in sizes {
        let grid = Grid::cubic(n, len)?;
        let ops = Spectral::new(&grid, dslab::ZeroMode::SphericalMean);
        let mut reports = Vec::new();
        for &r in &radii {
            let mut rng = rng_stream(seed, STREAM_STRAUSS);
            reports.push(strauss_check(
                &ops,
                samples,
                r,
                cfg.f64("strauss.ensemble_radius")?,
                cfg.f64("strauss.ring_width")?,
                &mut rng,
            )?);
        }
        runs.push(StraussRun { n, reports });
    }
    Ok(runs)
}

/// Halving of the raw ratio when `R` doubles, and coarse/fine agreement.
pub fn strauss_checks(runs: &[StraussRun]) -> Vec<Check> {
    let mut checks = Vec::new();
    for run in runs {
        for w in run.reports.windows(2) {
            if (w[1].radius - 2.0 * w[0].radius).abs() < 1e-12 {
                let factor = w[1].max_raw_ratio / w[0].max_raw_ratio;
                checks.push(Check::within(
                    &format!("n{}_halving_R{}", run.n, w[0].radius),
                    factor,
                    0.3,
                    0.8,
                ));
            }
        }
        checks.push(Check::flag(
            &format!("n{}_finite", run.n),
            run.reports.iter().all(|r| r.embedding_constant.is_finite()),
        ));
    }
    if let [coarse, fine] = runs {
        for (a, b) in coarse.reports.iter().zip(&fine.reports) {
            let drift = (a.embedding_constant / b.embedding_constant - 1.0).abs();
            checks.push(Check::at_most(&format!("refinement_R{}", a.radius), drift, 0.2));
        }
    }
    checks
}

pub fn decay(cfg: &Config, run: &mut RunDir) -> Result<Value, Failure> {
    let fits = decay_fits(cfg)?;
    let mut csv = String::from("operator,R,pairing,excluded\n");
    for fit in &fits {
        for (r, v) in fit.r_values.iter().zip(&fit.pairings) {
            let excluded = fit.excluded.iter().any(|x| x == r);
            csv.push_str(&format!("{},{r:.17e},{v:.17e},{excluded}\n", fit.operator.as_str()));
        }
        run.write_json(&format!("decay_fit_{}.json", fit.operator.as_str()), &fit_json(fit))?;
    }
    run.write_text("pairings.csv", &csv)?;
    let mut checks = decay_checks(cfg, &fits)?;
    let mut summary = json!({
        "slopes": fits.iter().map(|f| (f.operator.as_str(), f.slope)).collect::<std::collections::BTreeMap<_, _>>(),
    });
    if cfg.usize("strauss.samples")? > 0 {
        let runs = strauss_runs(cfg)?;
        let sc = strauss_checks(&runs);
        run.write_json("strauss.json", &json!({ "runs": runs, "checks": sc }))?;
        summary["strauss"] = serde_json::to_value(&runs)?;
        checks.extend(sc);
    }
    run.write_json("decay_checks.json", &checks)?;
    verdict_of(&checks)?;
    Ok(summary)
}

fn random_complex(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(grid, |_| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn identity_suite(cfg: &Config, run: &mut RunDir) -> Result<Value, Failure> {
    let (grid, ops, _) = operators(cfg)?;
    let seed = cfg.seed()?;
    let mut checks = Vec::new();

    let symbol = symbol_identity_check(&grid);
    checks.push(Check::at_most("symbol_identity_deviation", symbol.max_deviation, 1e-14));
    checks.push(Check::at_most("symbol_bound_loose", symbol.max_value, 4.0));
    checks.push(Check::at_most("symbol_bound_sharp", symbol.max_value, 0.5 + 1e-14));

    let mut rng = rng_stream(seed, STREAM_ADJOINT);
    let (f, g) = (random_complex(&grid, &mut rng), random_complex(&grid, &mut rng));
    let lhs = ops.e1(&f)?.inner(&g)?;
    let rhs = f.inner(&ops.e1(&g)?)?;
    checks.push(Check::at_most(
        "self_adjoint",
        (lhs - rhs).norm() / (f.l2_norm() * g.l2_norm()),
        1e-12,
    ));

    // Zero-mean isotropic profile: e^{-r²} - e^{-r²/4}/8.
    let radial = Field::from_real_fn(&grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        (-r2).exp() - 0.125 * (-r2 / 4.0).exp()
    });
    let third = ops.e1(&radial)?.inner(&radial)?.re;
    let mass = radial.l2_norm().powi(2);
    checks.push(Check::at_most(
        "radial_one_third",
        (third - mass / 3.0).abs() / mass,
        1e-8,
    ));

    let iso = cipolatti_identity_check(
        &ops,
        &Field::from_real_fn(&grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()),
    )?;
    let aniso = cipolatti_identity_check(
        &ops,
        &Field::from_real_fn(&grid, |x| (-(x[0] * x[0] + 4.0 * (x[1] * x[1] + x[2] * x[2]))).exp()),
    )?;
    checks.push(Check::at_most("cipolatti_isotropic", iso.deviation, 1e-3));
    checks.push(Check::at_most("cipolatti_anisotropic", aniso.deviation, 1e-3));

    let samples = cfg.usize("identity.samples")?;
    let mut rng = rng_stream(seed, STREAM_L2_PROBE);
    for op in [Operator::E1, Operator::E1sq] {
        let ratio = l2_boundedness_probe(&ops, op, samples, &mut rng)?;
        checks.push(Check::at_most(&format!("l2_contraction_{}", op.as_str()), ratio, 1.0));
    }

    let report = json!({
        "symbol_identity": symbol,
        "cipolatti": { "isotropic": iso, "anisotropic": aniso },
        "checks": checks,
    });
    run.write_json("identity_suite.json", &report)?;
    verdict_of(&checks)?;
    Ok(json!({ "checks": checks.len(), "passed": checks.iter().filter(|c| c.pass).count() }))
}

/// Action and Pohozaev functional of `γ Q` on a sample of scales.
pub fn scaling_profile(
    ops: &Spectral,
    q: &Field,
    p: &SimParams<f64>,
    gammas: &[f64],
) -> Result<Vec<(f64, f64, f64)>, Failure> {
    gammas
        .iter()
        .map(|&g| {
            let prim = Primitives::compute(ops, &q.scaled(g), p)?;
            Ok((g, prim.lagrangian(p), prim.pohozaev(p)))
        })
        .collect()
}
