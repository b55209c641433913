//! Flat `key = value` run configuration with dotted section names.
//!
//! Every lookup records the value actually used (explicit or default), so the effective
//! parameter set can be echoed into artifacts.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Keys accepted in a config file.
pub const KNOWN_KEYS: &[&str] = &[
    "sim.N",
    "sim.beta",
    "sim.m",
    "sim.l",
    "sim.alpha",
    "sim.chains",
    "sim.init",
    "sim.init_r",
    "potential.kind",
    "potential.kappa",
    "potential.table",
    "moves.p_displace",
    "moves.p_create",
    "moves.p_annihilate",
    "moves.delta",
    "moves.rho",
    "moves.tune",
    "moves.audit_every",
    "run.sweeps",
    "run.burn_in",
    "run.thin",
    "run.seed",
    "run.resume",
    "run.stop_after",
    "out.dir",
    "scan.betas",
    "scan.ms",
    "verify.identity_sizes",
    "verify.identity_samples",
    "verify.sampled_configs",
    "verify.synthetic_samples",
    "verify.layer_samples",
    "verify.fjm_sizes",
    "verify.fjm_samples",
    "verify.fault",
];

/// Keys that steer the run but cannot change its output, kept out of the parameter echo.
const CONTROL_KEYS: &[&str] = &["run.resume", "run.stop_after", "out.dir"];

pub const OUT_DIR_ENV: &str = "TRILATTICE_OUT_DIR";

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct Config {
    path: PathBuf,
    entries: BTreeMap<String, Entry>,
    used: std::sync::Mutex<BTreeMap<String, String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fail = |msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));
            let (key, value) = body.split_once('=').ok_or_else(|| fail(format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(fail(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(fail(format!("`{key}` has no value")));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(fail(format!("`{key}` already set on line {}", prev.line)));
            }
            entries.insert(key.to_string(), Entry { value: value.to_string(), line });
        }
        Ok(Self { path: path.to_path_buf(), entries, used: Default::default() })
    }

    /// `path:line` prefix for messages about `key`, or just the path if it was defaulted.
    pub fn locate(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some(e) => format!("{}:{} ({key})", self.path.display(), e.line),
            None => format!("{} ({key}, default)", self.path.display()),
        }
    }

    pub fn invalid(&self, key: &str, msg: impl Display) -> CliError {
        CliError::Validation(format!("{}: {msg}", self.locate(key)))
    }

    fn record(&self, key: &str, value: String) {
        self.used.lock().unwrap().insert(key.to_string(), value);
    }

    fn parse_value<V: FromStr>(&self, key: &str, raw: &str) -> Result<V, CliError>
    where
        V::Err: Display,
    {
        raw.parse::<V>().map_err(|e| self.invalid(key, format!("cannot parse `{raw}`: {e}")))
    }

    pub fn get<V: FromStr + Display>(&self, key: &str, default: Option<V>) -> Result<V, CliError>
    where
        V::Err: Display,
    {
        let v = match (self.entries.get(key), default) {
            (Some(e), _) => self.parse_value(key, &e.value)?,
            (None, Some(d)) => d,
            (None, None) => return Err(CliError::Validation(format!("{}: missing required key `{key}`", self.path.display()))),
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn opt<V: FromStr + Display>(&self, key: &str) -> Result<Option<V>, CliError>
    where
        V::Err: Display,
    {
        match self.entries.get(key) {
            Some(e) => {
                let v: V = self.parse_value(key, &e.value)?;
                self.record(key, v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    /// Comma-separated list.
    pub fn list<V: FromStr + Display>(&self, key: &str, default: Option<Vec<V>>) -> Result<Vec<V>, CliError>
    where
        V::Err: Display,
    {
        let v = match (self.entries.get(key), default) {
            (Some(e), _) => e
                .value
                .split(',')
                .map(|s| self.parse_value(key, s.trim()))
                .collect::<Result<Vec<V>, _>>()?,
            (None, Some(d)) => d,
            (None, None) => return Err(CliError::Validation(format!("{}: missing required key `{key}`", self.path.display()))),
        };
        if v.is_empty() {
            return Err(self.invalid(key, "empty list"));
        }
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        self.record(key, text);
        Ok(v)
    }

    /// Path value, resolved relative to the config file's directory.
    pub fn path_opt(&self, key: &str) -> Option<PathBuf> {
        let e = self.entries.get(key)?;
        self.record(key, e.value.clone());
        let p = PathBuf::from(&e.value);
        Some(if p.is_absolute() { p } else { self.path.parent().unwrap_or(Path::new(".")).join(p) })
    }

    /// Output directory: the environment override, else `out.dir`, else `out` next to the
    /// config file.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            return PathBuf::from(dir);
        }
        self.path_opt("out.dir")
            .unwrap_or_else(|| self.path.parent().unwrap_or(Path::new(".")).join("out"))
    }

    /// Effective parameters that can affect results, in key order.
    pub fn effective(&self) -> BTreeMap<String, String> {
        self.used
            .lock()
            .unwrap()
            .iter()
            .filter(|(k, _)| !CONTROL_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, CliError> {
        Config::parse(Path::new("run.cfg"), text)
    }

    #[test]
    fn reads_values_comments_and_defaults() {
        let c = parse("# header\nsim.N = 6\n\nsim.beta=50 # inline\nscan.betas = 1, 2.5,4\n").unwrap();
        assert_eq!(c.get::<usize>("sim.N", None).unwrap(), 6);
        assert_eq!(c.get::<f64>("sim.beta", None).unwrap(), 50.0);
        assert_eq!(c.get::<f64>("sim.m", Some(3.0)).unwrap(), 3.0);
        assert_eq!(c.list::<f64>("scan.betas", None).unwrap(), vec![1.0, 2.5, 4.0]);
        let eff = c.effective();
        assert_eq!(eff["sim.m"], "3");
        assert_eq!(eff["scan.betas"], "1, 2.5, 4");
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("sim.N = 6\nsim.bogus = 1\n").unwrap_err().to_string();
        assert!(e.contains("run.cfg:2") && e.contains("sim.bogus"), "{e}");
        let e = parse("sim.N = 6\nsim.N = 7\n").unwrap_err().to_string();
        assert!(e.contains("run.cfg:2") && e.contains("line 1"), "{e}");
        let e = parse("\n\nsim.N 6\n").unwrap_err().to_string();
        assert!(e.contains("run.cfg:3"), "{e}");
        let c = parse("sim.N = 6\nsim.beta = fast\n").unwrap();
        let e = c.get::<f64>("sim.beta", None).unwrap_err().to_string();
        assert!(e.contains("run.cfg:2") && e.contains("fast"), "{e}");
        let e = c.get::<f64>("sim.m", None).unwrap_err().to_string();
        assert!(e.contains("missing") && e.contains("sim.m"), "{e}");
    }

    #[test]
    fn control_keys_are_not_echoed() {
        let c = parse("run.seed = 4\nrun.stop_after = 10\nout.dir = x\n").unwrap();
        c.get::<u64>("run.seed", None).unwrap();
        c.get::<u64>("run.stop_after", None).unwrap();
        let _ = c.path_opt("out.dir");
        assert_eq!(c.effective().keys().collect::<Vec<_>>(), vec!["run.seed"]);
    }
}
