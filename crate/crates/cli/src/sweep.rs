//! Parameter sweeps over a resumable JSON-lines store.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{mpsc, Mutex};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::commands;
use crate::config::Config;
use crate::failure::Failure;
use crate::output::RunDir;

pub const STORE: &str = "results.jsonl";

/// Sweep axis name and the configuration key it overrides.
const AXES: [(&str, &str); 5] = [
    ("c1", "model.c1"),
    ("c2", "model.c2"),
    ("alpha", "model.alpha"),
    ("gamma_scale", "initial.gamma_scale"),
    ("R", "virial.R"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    GroundState,
    BlowupRun,
    DecayFit,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::GroundState => "ground_state",
            Task::BlowupRun => "blowup_run",
            Task::DecayFit => "decay_fit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Task::GroundState, Task::BlowupRun, Task::DecayFit]
            .into_iter()
            .find(|t| t.as_str() == s)
    }

    fn run(self, cfg: &Config) -> Result<Value, Failure> {
        match self {
            Task::GroundState => commands::ground_state_task(cfg),
            Task::BlowupRun => commands::blowup_task(cfg),
            Task::DecayFit => commands::decay_task(cfg),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub task: Task,
    /// Axes with explicit value lists, in `AXES` order.
    pub axes: Vec<(&'static str, &'static str, Vec<f64>)>,
    pub max_points: usize,
    pub resume: bool,
}

#[derive(Clone, Debug)]
pub struct Point {
    pub values: BTreeMap<String, f64>,
    pub config: Config,
    pub digest: String,
}

impl SweepSpec {
    /// Reads the `sweep.*` keys. Values are checked directly; point configs
    /// are built later by [`SweepSpec::points`].
    pub fn from_config(cfg: &Config) -> Result<Self, Failure> {
        let task = Task::parse(cfg.get("sweep.task"))
            .ok_or_else(|| Failure::Config(format!("sweep.task: unknown task {:?}", cfg.get("sweep.task"))))?;
        let mut axes = Vec::new();
        let mut count = 1usize;
        for (name, key) in AXES {
            let sweep_key = format!("sweep.{name}");
            if cfg.get(&sweep_key).trim().is_empty() {
                continue;
            }
            let values = cfg.list(&sweep_key)?;
            if values.is_empty() {
                return Err(Failure::Config(format!("{sweep_key}: empty list")));
            }
            for &v in &values {
                let ok = match name {
                    "alpha" => v > 0.0 && v < 4.0,
                    "gamma_scale" => v > 0.0 && v.is_finite(),
                    "R" => v >= 0.0 && v.is_finite(),
                    _ => v >= 0.0 && v.is_finite(),
                };
                if !ok {
                    return Err(Failure::Config(format!("{sweep_key}: value {v} out of range")));
                }
            }
            count = count.saturating_mul(values.len());
            axes.push((name, key, values));
        }
        let max_points = cfg.usize("sweep.max_points")?;
        if count > max_points {
            return Err(Failure::Config(format!(
                "sweep has {count} points, more than sweep.max_points={max_points}"
            )));
        }
        Ok(Self {
            task,
            axes,
            max_points,
            resume: cfg.bool("sweep.resume")?,
        })
    }

    /// Cartesian product, first axis slowest.
    pub fn points(&self, base: &Config) -> Result<Vec<Point>, Failure> {
        let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
        for (_, _, values) in &self.axes {
            combos = combos
                .into_iter()
                .flat_map(|c| values.iter().map(move |&v| [c.clone(), vec![v]].concat()))
                .collect();
        }
        combos.into_iter().map(|combo| self.point(base, &combo)).collect()
    }

    fn point(&self, base: &Config, combo: &[f64]) -> Result<Point, Failure> {
        let mut config = base.clone();
        for ((_, key, _), v) in self.axes.iter().zip(combo) {
            config.set(key, &format!("{v:?}"))?;
        }
        let mut values = BTreeMap::new();
        for (name, key) in AXES {
            let v = if key == "virial.R" {
                config.virial_radius()?
            } else {
                config.f64(key)?
            };
            values.insert(name.to_string(), v);
        }
        let mut hasher = Sha256::new();
        hasher.update(format!("task={}\n", self.task.as_str()));
        for (k, v) in config.entries() {
            if !k.starts_with("sweep.") {
                hasher.update(format!("{k}={v}\n"));
            }
        }
        Ok(Point {
            values,
            config,
            digest: hex::encode(hasher.finalize()),
        })
    }
}

/// Drops a partial trailing line and returns the digests already stored.
fn prepare_store(path: &Path, resume: bool) -> Result<HashSet<String>, Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
    if !resume || !path.exists() {
        fs::write(path, b"").map_err(io)?;
        return Ok(HashSet::new());
    }
    let bytes = fs::read(path).map_err(io)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        OpenOptions::new()
            .write(true)
            .open(path)
            .and_then(|f| f.set_len(complete as u64))
            .map_err(io)?;
    }
    let text = String::from_utf8_lossy(&bytes[..complete]);
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter_map(|v| v.get("digest").and_then(Value::as_str).map(str::to_string))
        .collect())
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Evaluates one point; failures and panics become error records.
pub fn execute(task: Task, point: &Point) -> String {
    let outcome = catch_unwind(AssertUnwindSafe(|| task.run(&point.config)))
        .unwrap_or_else(|p| Err(Failure::Internal(format!("panic: {}", panic_message(p.as_ref())))));
    let mut line = json!({
        "digest": point.digest,
        "point": point.values,
        "task": task.as_str(),
    });
    match outcome {
        Ok(result) => {
            line["status"] = "ok".into();
            line["result"] = result;
        }
        Err(f) => {
            line["status"] = "error".into();
            line["error"] = json!({ "kind": f.kind(), "message": f.message() });
        }
    }
    serde_json::to_string(&line).expect("json value serializes")
}

pub fn sweep(cfg: &Config, run: &mut RunDir, workers: usize) -> Result<Value, Failure> {
    let spec = SweepSpec::from_config(cfg)?;
    let points = spec.points(cfg)?;
    let store = run.path(STORE);
    let done = prepare_store(&store, spec.resume)?;
    let total = points.len();
    let pending: VecDeque<Point> = points.into_iter().filter(|p| !done.contains(&p.digest)).collect();
    let skipped = total - pending.len();
    let mut file = OpenOptions::new()
        .append(true)
        .open(&store)
        .map_err(|e| Failure::Io(format!("{}: {e}", store.display())))?;

    let workers = workers.max(1).min(pending.len().max(1));
    let queue = Mutex::new(pending);
    let (tx, rx) = mpsc::channel::<String>();
    let mut written = 0usize;
    let mut errors = 0usize;
    let mut write_error = None;
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let queue = &queue;
            s.spawn(move || loop {
                let next = queue.lock().expect("queue lock").pop_front();
                let Some(point) = next else { break };
                if tx.send(execute(spec.task, &point)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for line in rx {
            if write_error.is_some() {
                continue;
            }
            if line.contains("\"status\":\"error\"") {
                errors += 1;
            }
            let res = file
                .write_all(line.as_bytes())
                .and_then(|_| file.write_all(b"\n"))
                .and_then(|_| file.flush());
            match res {
                Ok(()) => written += 1,
                Err(e) => {
                    write_error = Some(Failure::Io(format!("{}: {e}", store.display())));
                    queue.lock().expect("queue lock").clear();
                }
            }
        }
    });
    run.track(STORE);
    if let Some(f) = write_error {
        return Err(f);
    }
    Ok(json!({
        "task": spec.task.as_str(),
        "points": total,
        "skipped": skipped,
        "computed": written,
        "errors": errors,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Config {
        let mut cfg = Config::default();
        for (k, v) in [
            ("sweep.c1", "1,2"),
            ("sweep.alpha", "1.5,2"),
            ("sweep.gamma_scale", "1.1"),
        ] {
            cfg.set(k, v).unwrap();
        }
        cfg
    }

    #[test]
    fn product_and_digests() {
        let cfg = base();
        let spec = SweepSpec::from_config(&cfg).unwrap();
        let points = spec.points(&cfg).unwrap();
        assert_eq!(points.len(), 4);
        assert_eq!(points[0].values["c1"], 1.0);
        assert_eq!(points[1].values["alpha"], 2.0);
        assert_eq!(points[2].values["c1"], 2.0);
        let digests: HashSet<_> = points.iter().map(|p| p.digest.clone()).collect();
        assert_eq!(digests.len(), 4);

        let mut other = cfg.clone();
        other.set("sweep.max_points", "100").unwrap();
        let again = SweepSpec::from_config(&other).unwrap().points(&other).unwrap();
        assert_eq!(again[3].digest, points[3].digest);
    }

    #[test]
    fn rejects_bad_axes() {
        let mut cfg = base();
        cfg.set("sweep.max_points", "3").unwrap();
        assert!(SweepSpec::from_config(&cfg).is_err());
        let mut cfg = base();
        cfg.set("sweep.gamma_scale", "0").unwrap();
        assert!(SweepSpec::from_config(&cfg).is_err());
        let mut cfg = base();
        cfg.set("sweep.task", "nothing").unwrap();
        assert!(SweepSpec::from_config(&cfg).is_err());
    }

    #[test]
    fn store_drops_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STORE);
        fs::write(&path, "{\"digest\":\"a\"}\n{\"digest\":\"b\"}\n{\"dig").unwrap();
        let done = prepare_store(&path, true).unwrap();
        assert_eq!(done.len(), 2);
        assert!(fs::read_to_string(&path).unwrap().ends_with("\"b\"}\n"));
        assert!(prepare_store(&path, false).unwrap().is_empty());
        assert_eq!(fs::read(&path).unwrap().len(), 0);
    }
}
