//! Flat `key=value` configuration with dotted keys.
//!
//! Every key has a default; unknown keys, duplicates and malformed lines are
//! errors. Lists are comma-separated.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dslab::decay::{DecayExperimentSpec, Operator};
use dslab::evolution::EvolveConfig;
use dslab::ground_state::{CertifyTolerances, Method, SolverOptions};
use dslab::virial::ProfileKind;
use dslab::{Grid, Params, ZeroMode};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

const SCHEMA: &[(&str, &str)] = &[
    ("seed", "0"),
    ("grid.n1", "64"),
    ("grid.n2", "64"),
    ("grid.n3", "64"),
    ("grid.L1", "16"),
    ("grid.L2", "16"),
    ("grid.L3", "16"),
    ("model.c1", "1"),
    ("model.c2", "1"),
    ("model.alpha", "2"),
    ("model.zero_mode", "spherical_mean"),
    ("solver.method", "auto"),
    ("solver.tol", "1e-8"),
    ("solver.max_iter", "2000"),
    ("solver.theta", "1.5"),
    ("solver.relaxation", "0.5"),
    ("certify.residual", "1e-6"),
    ("certify.pohozaev", "5e-3"),
    ("certify.nehari", "1e-6"),
    ("certify.cylindrical", "1e-4"),
    ("certify.parity", "1e-8"),
    ("initial.gamma_scale", "1.2"),
    ("initial.snapshot", ""),
    ("evolve.dt0", "1e-3"),
    ("evolve.t_max", "1"),
    ("evolve.dt_min", "1e-5"),
    ("evolve.grad_blowup_factor", "10"),
    ("evolve.cfl_safety", "1"),
    ("evolve.record_every", "10"),
    ("evolve.mass_tol", "1e-8"),
    ("evolve.energy_tol", "1e-6"),
    ("evolve.require_criterion", "false"),
    ("evolve.convexity", "false"),
    ("evolve.snapshot_every", "0"),
    ("virial.enabled", "true"),
    ("virial.R", "0"),
    ("virial.profile", "martel"),
    ("virial_check.dt", "1.6e-2"),
    ("virial_check.halvings", "3"),
    ("virial_check.final_dt", "1e-4"),
    ("virial_check.order_tol", "0.3"),
    ("virial_check.rel_tol", "1e-3"),
    ("decay.operator", "both"),
    ("decay.gamma1", "1"),
    ("decay.gamma2", "4"),
    ("decay.R", "2,3,4,6"),
    ("decay.f_mass", "1"),
    ("decay.slope_tol", "0.3"),
    ("decay.n1", "128"),
    ("decay.n2", "256"),
    ("decay.n3", "128"),
    ("decay.h", "0.75"),
    ("strauss.samples", "200"),
    ("strauss.R", "4,8"),
    ("strauss.n", "64"),
    ("strauss.n_fine", "96"),
    ("strauss.L", "32"),
    ("strauss.ensemble_radius", "14"),
    ("strauss.ring_width", "0.8"),
    ("identity.samples", "100"),
    ("sweep.task", "ground_state"),
    ("sweep.c1", ""),
    ("sweep.c2", ""),
    ("sweep.alpha", ""),
    ("sweep.gamma_scale", ""),
    ("sweep.R", ""),
    ("sweep.max_points", "256"),
    ("sweep.resume", "true"),
];

/// Resolved configuration: every schema key with its effective value.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: SCHEMA.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(bad(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| bad(format!("line {}: {}", lineno + 1, e)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(bad(format!("unknown key {key}"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("schema key")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// One `key=value` line per key, sorted.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn f64(&self, key: &str) -> Result<f64, Failure> {
        let v = self.get(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(format!("{key}: expected a finite number, got {v:?}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, Failure> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| bad(format!("{key}: expected a nonnegative integer, got {v:?}")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, Failure> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| bad(format!("{key}: expected a nonnegative integer, got {v:?}")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, Failure> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(bad(format!("{key}: expected true or false, got {v:?}"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, Failure> {
        let v = self.get(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("{key}: bad list entry {s:?}")))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        self.u64("seed")
    }

    pub fn grid(&self) -> Result<Grid, Failure> {
        let n = [self.usize("grid.n1")?, self.usize("grid.n2")?, self.usize("grid.n3")?];
        let len = [self.f64("grid.L1")?, self.f64("grid.L2")?, self.f64("grid.L3")?];
        Ok(Grid::new(n, len)?)
    }

    pub fn params(&self) -> Result<Params, Failure> {
        Ok(Params::new(
            self.f64("model.c1")?,
            self.f64("model.c2")?,
            self.f64("model.alpha")?,
        )?)
    }

    pub fn zero_mode(&self) -> Result<ZeroMode, Failure> {
        let v = self.get("model.zero_mode");
        ZeroMode::parse(v).ok_or_else(|| bad(format!("model.zero_mode: unknown rule {v:?}")))
    }

    /// `None` selects Petviashvili with gradient-flow fallback.
    pub fn method(&self) -> Result<Option<Method>, Failure> {
        match self.get("solver.method") {
            "auto" => Ok(None),
            v => Method::parse(v)
                .map(Some)
                .ok_or_else(|| bad(format!("solver.method: unknown method {v:?}"))),
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions, Failure> {
        let opts = SolverOptions {
            tol: self.f64("solver.tol")?,
            max_iter: self.usize("solver.max_iter")?,
            theta: self.f64("solver.theta")?,
            relaxation: self.f64("solver.relaxation")?,
            ..Default::default()
        };
        if !(opts.tol > 0.0) || !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) || opts.max_iter == 0 {
            return Err(bad("solver: need tol > 0, max_iter > 0 and relaxation in (0, 1]"));
        }
        Ok(opts)
    }

    pub fn certify_tolerances(&self) -> Result<CertifyTolerances, Failure> {
        Ok(CertifyTolerances {
            residual: self.f64("certify.residual")?,
            pohozaev: self.f64("certify.pohozaev")?,
            nehari: self.f64("certify.nehari")?,
            cylindrical: self.f64("certify.cylindrical")?,
            parity: self.f64("certify.parity")?,
        })
    }

    pub fn gamma_scale(&self) -> Result<f64, Failure> {
        self.f64("initial.gamma_scale")
    }

    pub fn initial_snapshot(&self) -> Option<PathBuf> {
        let v = self.get("initial.snapshot");
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn evolve_config(&self) -> Result<EvolveConfig, Failure> {
        let cfg = EvolveConfig {
            dt0: self.f64("evolve.dt0")?,
            t_max: self.f64("evolve.t_max")?,
            dt_min: self.f64("evolve.dt_min")?,
            grad_blowup_factor: self.f64("evolve.grad_blowup_factor")?,
            cfl_safety: self.f64("evolve.cfl_safety")?,
            record_every: self.usize("evolve.record_every")?,
            mass_tol: self.f64("evolve.mass_tol")?,
            energy_tol: self.f64("evolve.energy_tol")?,
            l4_radius: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Virial radius; `0` selects a quarter of the smaller transverse length.
    pub fn virial_radius(&self) -> Result<f64, Failure> {
        let r = self.f64("virial.R")?;
        if r < 0.0 {
            return Err(bad("virial.R must be nonnegative"));
        }
        if r > 0.0 {
            return Ok(r);
        }
        let grid = self.grid()?;
        Ok(grid.len[1].min(grid.len[2]) / 4.0)
    }

    pub fn profile_kind(&self) -> Result<ProfileKind, Failure> {
        match self.get("virial.profile") {
            "martel" => Ok(ProfileKind::Martel),
            "unlocalized" => Ok(ProfileKind::Unlocalized),
            v => Err(bad(format!("virial.profile: unknown profile {v:?}"))),
        }
    }

    /// Halving ladder `dt, dt/2, ...` followed by the final fine step.
    pub fn virial_ladder(&self) -> Result<(Vec<f64>, f64), Failure> {
        let dt = self.f64("virial_check.dt")?;
        let halvings = self.usize("virial_check.halvings")?;
        let fine = self.f64("virial_check.final_dt")?;
        if !(dt > 0.0 && fine > 0.0) || halvings == 0 {
            return Err(bad("virial_check: need dt > 0, final_dt > 0 and halvings >= 1"));
        }
        Ok(((0..=halvings).map(|i| dt / f64::powi(2.0, i as i32)).collect(), fine))
    }

    pub fn decay_operators(&self) -> Result<Vec<Operator>, Failure> {
        match self.get("decay.operator") {
            "both" => Ok(vec![Operator::E1, Operator::E1sq]),
            v => Operator::parse(v)
                .map(|op| vec![op])
                .ok_or_else(|| bad(format!("decay.operator: unknown operator {v:?}"))),
        }
    }

    pub fn decay_spec(&self, operator: Operator) -> Result<DecayExperimentSpec, Failure> {
        let n = [
            self.usize("decay.n1")?,
            self.usize("decay.n2")?,
            self.usize("decay.n3")?,
        ];
        let h = self.f64("decay.h")?;
        let grid = Grid::new(n, n.map(|k| k as f64 * h))?;
        let spec = DecayExperimentSpec {
            operator,
            inner_radius_factor: self.f64("decay.gamma1")?,
            outer_radius_factor: self.f64("decay.gamma2")?,
            r_values: self.list("decay.R")?,
            f_mass: self.f64("decay.f_mass")?,
            grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.seed()?;
        self.grid()?;
        self.params()?;
        self.zero_mode()?;
        self.method()?;
        self.solver_options()?;
        self.certify_tolerances()?;
        self.gamma_scale()?;
        self.evolve_config()?;
        self.virial_radius()?;
        self.profile_kind()?;
        self.bool("virial.enabled")?;
        self.bool("evolve.require_criterion")?;
        self.bool("evolve.convexity")?;
        self.usize("evolve.snapshot_every")?;
        self.virial_ladder()?;
        self.f64("virial_check.order_tol")?;
        self.f64("virial_check.rel_tol")?;
        for op in self.decay_operators()? {
            self.decay_spec(op)?;
        }
        self.f64("decay.slope_tol")?;
        self.usize("strauss.samples")?;
        self.list("strauss.R")?;
        self.usize("strauss.n")?;
        self.usize("strauss.n_fine")?;
        self.f64("strauss.L")?;
        self.f64("strauss.ensemble_radius")?;
        self.f64("strauss.ring_width")?;
        self.usize("identity.samples")?;
        crate::sweep::SweepSpec::from_config(self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid().unwrap().n, [64, 64, 64]);
        assert_eq!(cfg.virial_radius().unwrap(), 4.0);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = Config::parse("# comment\n\ngrid.n1 = 32\nmodel.alpha=1.5\n").unwrap();
        assert_eq!(cfg.get("grid.n1"), "32");
        assert_eq!(cfg.params().unwrap().alpha, 1.5);
    }

    #[test]
    fn unknown_duplicate_and_invalid_keys_fail() {
        assert!(matches!(Config::parse("grid.nn=3"), Err(Failure::Config(_))));
        assert!(matches!(Config::parse("seed=1\nseed=2"), Err(Failure::Config(_))));
        assert!(matches!(Config::parse("model.alpha=5"), Err(Failure::Config(_))));
        assert!(matches!(Config::parse("just a line"), Err(Failure::Config(_))));
        assert!(matches!(Config::parse("decay.gamma2=0.5"), Err(Failure::Config(_))));
    }

    #[test]
    fn digest_tracks_values() {
        let a = Config::default();
        let mut b = Config::default();
        assert_eq!(a.digest(), b.digest());
        b.set("seed", "3").unwrap();
        assert_ne!(a.digest(), b.digest());
        assert!(a.canonical().lines().all(|l| l.contains('=')));
    }

    #[test]
    fn ladder_halves() {
        let (ladder, fine) = Config::default().virial_ladder().unwrap();
        assert_eq!(ladder, vec![1.6e-2, 8e-3, 4e-3, 2e-3]);
        assert_eq!(fine, 1e-4);
    }
}
