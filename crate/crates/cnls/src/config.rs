//! Experiment configuration.
//!
//! Values come from an optional INI file (the unnamed section applies to
//! every command, a `[command]` section to that command only) and from
//! command-line flags, which win. The merged key/value map is then parsed
//! into a typed [`ExperimentConfig`]; every failure names its key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cnls_core::{PowerPair, RadialGrid, Regime};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Static,
    Fiber,
    GroundState,
    Curve,
    Evolve,
    Dichotomy,
    Figure,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Static,
        Command::Fiber,
        Command::GroundState,
        Command::Curve,
        Command::Evolve,
        Command::Dichotomy,
        Command::Figure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Static => "static",
            Command::Fiber => "fiber",
            Command::GroundState => "groundstate",
            Command::Curve => "curve",
            Command::Evolve => "evolve",
            Command::Dichotomy => "dichotomy",
            Command::Figure => "figure",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Keys read by this command besides [`COMMON_KEYS`].
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Static => &["p", "q", "rmax", "n"],
            Command::Fiber => &["p", "q", "rmax", "n", "source", "amplitude", "width"],
            Command::GroundState => &["p", "q", "rmax", "n", "masses", "omegas"],
            Command::Curve => &["p", "q", "rmax", "n", "masses"],
            Command::Evolve => &[
                "p",
                "q",
                "rmax",
                "n",
                "datum",
                "amplitude",
                "width",
                "rho",
                "rho_fraction",
                "mu_scale",
                "t_end",
                "dt",
                "sample_every",
            ],
            Command::Dichotomy => &[
                "p",
                "q",
                "rmax",
                "n",
                "rho",
                "rho_fraction",
                "mu_scale",
                "t_end",
                "dt",
                "sample_every",
            ],
            Command::Figure => &[
                "rmax",
                "n",
                "left_p",
                "left_q",
                "left_masses",
                "right_p",
                "right_q",
                "right_masses",
            ],
        }
    }

    fn uses_dynamics_grid(self) -> bool {
        matches!(self, Command::Evolve | Command::Dichotomy)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Keys that control where and how a run executes, not what it computes.
pub const COMMON_KEYS: [&str; 4] = ["out", "cache", "cache_dir", "jobs"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{message}", key.as_ref().map(|k| format!("key `{k}`: ")).unwrap_or_default())]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            key: None,
            message: message.into(),
        }
    }
}

/// A mass parameter `ρ = √M`, absolute or relative to the critical mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassSpec {
    Absolute(f64),
    OfCritical(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiberSource {
    Gaussian { amplitude: f64, width: f64 },
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Masses(Vec<f64>),
    Frequencies(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Datum {
    Gaussian { amplitude: f64, width: f64 },
    GroundState { rho: MassSpec, mu_scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub pq: PowerPair,
    /// `None` picks a default mass range once the static solution is known.
    pub masses: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Static,
    Fiber {
        source: FiberSource,
    },
    GroundState {
        targets: Targets,
    },
    Curve {
        masses: Vec<f64>,
    },
    Evolve {
        datum: Datum,
        t_end: f64,
        dt: f64,
        sample_every: usize,
    },
    Dichotomy {
        rho: MassSpec,
        mu_scale: f64,
        horizon: f64,
        dt: f64,
        sample_every: usize,
    },
    Figure {
        left: Panel,
        right: Panel,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Absent only for `figure`, which carries one pair per panel.
    pub pq: Option<PowerPair>,
    pub grid: RadialGrid,
    pub task: Task,
    pub out: PathBuf,
    pub cache: bool,
    pub cache_dir: PathBuf,
    pub jobs: usize,
}

/// Merged key/value pairs before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    /// Reads the unnamed section and the section of `command` from an INI
    /// file. Keys no command knows are rejected.
    pub fn from_ini(path: &Path, command: Command) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        Self::from_ini_str(&text, command)
    }

    pub fn from_ini_str(text: &str, command: Command) -> Result<Self, ConfigError> {
        let ini = ini::Ini::load_from_str(text)
            .map_err(|e| ConfigError::general(format!("malformed config: {e}")))?;
        let mut general = BTreeMap::new();
        let mut own = BTreeMap::new();
        for (section, props) in ini.iter() {
            let target = match section {
                None => &mut general,
                Some(name) => match Command::from_name(name) {
                    Some(c) if c == command => &mut own,
                    Some(_) => continue,
                    None => return Err(ConfigError::general(format!("unknown section [{name}]"))),
                },
            };
            for (key, value) in props.iter() {
                if !is_known_key(key) {
                    return Err(ConfigError::at(key, "unknown key"));
                }
                target.insert(key.to_string(), value.trim().to_string());
            }
        }
        // unnamed-section keys meant for other commands are shared defaults
        general.retain(|k, _| accepts(command, k));
        for key in own.keys() {
            if !accepts(command, key) {
                return Err(ConfigError::at(
                    key,
                    format!("not used by the {command} command"),
                ));
            }
        }
        general.extend(own);
        Ok(RawConfig { values: general })
    }

    /// Applies a flag override.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Checks every key against `command` and builds the typed config.
    pub fn resolve(&self, command: Command) -> Result<ExperimentConfig, ConfigError> {
        for key in self.values.keys() {
            if !accepts(command, key) {
                return Err(ConfigError::at(
                    key,
                    format!("not used by the {command} command"),
                ));
            }
        }
        let r = Reader { raw: self };
        let out = PathBuf::from(r.string("out")?.unwrap_or("results"));
        let cache = r.boolean("cache")?.unwrap_or(true);
        let cache_dir = r
            .string("cache_dir")?
            .map_or_else(|| out.join("cache"), PathBuf::from);
        let jobs = match r.count("jobs")? {
            Some(j) => j,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };

        let default_grid = if command.uses_dynamics_grid() {
            RadialGrid::dynamics()
        } else {
            RadialGrid::stationary()
        };
        let r_max = r.positive("rmax")?.unwrap_or(default_grid.r_max());
        let n = r.count("n")?.unwrap_or(default_grid.intervals());
        let grid = RadialGrid::new(r_max, n).map_err(|e| ConfigError::at("n", e.to_string()))?;
        if command.uses_dynamics_grid() && !n.is_power_of_two() {
            return Err(ConfigError::at(
                "n",
                format!("n = {n} must be a power of two for the sine transform"),
            ));
        }

        let pq = if command == Command::Figure {
            None
        } else {
            Some(r.pair("p", "q", None)?)
        };
        let task = match command {
            Command::Static => Task::Static,
            Command::Fiber => Task::Fiber {
                source: match r.string("source")?.unwrap_or("gaussian") {
                    "gaussian" => FiberSource::Gaussian {
                        amplitude: r.positive("amplitude")?.unwrap_or(1.0),
                        width: r.positive("width")?.unwrap_or(1.0),
                    },
                    "static" => FiberSource::Static,
                    other => {
                        return Err(ConfigError::at(
                            "source",
                            format!("`{other}` is not gaussian or static"),
                        ))
                    }
                },
            },
            Command::GroundState => match (r.list("masses")?, r.list("omegas")?) {
                (Some(m), None) => Task::GroundState {
                    targets: Targets::Masses(positive_list("masses", m)?),
                },
                (None, Some(w)) => {
                    if let Some(bad) = w.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
                        return Err(ConfigError::at(
                            "omegas",
                            format!("frequency {bad} must be finite and >= 0"),
                        ));
                    }
                    Task::GroundState {
                        targets: Targets::Frequencies(w),
                    }
                }
                (Some(_), Some(_)) => {
                    return Err(ConfigError::at(
                        "omegas",
                        "give either masses or omegas, not both",
                    ))
                }
                (None, None) => return Err(ConfigError::at("masses", "required (or omegas)")),
            },
            Command::Curve => Task::Curve {
                masses: ascending("masses", r.list("masses")?.unwrap_or_default())?,
            },
            Command::Evolve => {
                let datum = match r.string("datum")?.unwrap_or("gaussian") {
                    "gaussian" => Datum::Gaussian {
                        amplitude: r.positive("amplitude")?.unwrap_or(1.0),
                        width: r.positive("width")?.unwrap_or(1.0),
                    },
                    "ground_state" => Datum::GroundState {
                        rho: r.mass_spec(pq.expect("pair parsed"))?,
                        mu_scale: r.positive("mu_scale")?.unwrap_or(1.0),
                    },
                    other => {
                        return Err(ConfigError::at(
                            "datum",
                            format!("`{other}` is not gaussian or ground_state"),
                        ))
                    }
                };
                Task::Evolve {
                    datum,
                    t_end: r.positive("t_end")?.unwrap_or(0.5),
                    dt: r.positive("dt")?.unwrap_or(1e-4),
                    sample_every: r.count("sample_every")?.unwrap_or(50),
                }
            }
            Command::Dichotomy => Task::Dichotomy {
                rho: r.mass_spec(pq.expect("pair parsed"))?,
                mu_scale: r
                    .positive("mu_scale")?
                    .ok_or_else(|| ConfigError::at("mu_scale", "required"))?,
                horizon: r.positive("t_end")?.unwrap_or(1.0),
                dt: r.positive("dt")?.unwrap_or(1e-4),
                sample_every: r.count("sample_every")?.unwrap_or(50),
            },
            Command::Figure => {
                let left = r.pair("left_p", "left_q", Some((3.0, 2.0)))?;
                if left.regime() != Regime::MassSubcritical {
                    return Err(ConfigError::at("left_q", "the left panel needs q < 7/3"));
                }
                let right = r.pair("right_p", "right_q", Some((4.0, 3.0)))?;
                if right.regime() == Regime::MassSubcritical {
                    return Err(ConfigError::at("right_q", "the right panel needs q >= 7/3"));
                }
                let masses = |key: &str| r.list(key)?.map(|m| ascending(key, m)).transpose();
                Task::Figure {
                    left: Panel {
                        pq: left,
                        masses: masses("left_masses")?,
                    },
                    right: Panel {
                        pq: right,
                        masses: masses("right_masses")?,
                    },
                }
            }
        };
        Ok(ExperimentConfig {
            command,
            pq,
            grid,
            task,
            out,
            cache,
            cache_dir,
            jobs,
        })
    }
}

fn is_known_key(key: &str) -> bool {
    COMMON_KEYS.contains(&key) || Command::ALL.iter().any(|c| c.keys().contains(&key))
}

fn accepts(command: Command, key: &str) -> bool {
    COMMON_KEYS.contains(&key) || command.keys().contains(&key)
}

fn positive_list(key: &str, values: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(bad) => Err(ConfigError::at(
            key,
            format!("entry {bad} must be positive and finite"),
        )),
        None => Ok(values),
    }
}

fn ascending(key: &str, values: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    let values = positive_list(key, values)?;
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(ConfigError::at(key, "entries must be sorted ascending"));
    }
    Ok(values)
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn string(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.raw.get(key) {
            Some("") => Err(ConfigError::at(key, "empty value")),
            other => Ok(other),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.string(key)?.map(|s| parse_float(key, s)).transpose()
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.float(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(ConfigError::at(key, format!("{v} must be positive")))
            }
            other => Ok(other),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) => match s.parse::<usize>() {
                Ok(0) | Err(_) => Err(ConfigError::at(
                    key,
                    format!("`{s}` is not a positive integer"),
                )),
                Ok(v) => Ok(Some(v)),
            },
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.string(key)? {
            None => Ok(None),
            Some("true" | "on" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "off" | "no" | "0") => Ok(Some(false)),
            Some(s) => Err(ConfigError::at(key, format!("`{s}` is not a boolean"))),
        }
    }

    /// Comma-separated numbers; an empty value is an empty list.
    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(s) = self.raw.get(key) else {
            return Ok(None);
        };
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| parse_float(key, t))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn pair(
        &self,
        p_key: &str,
        q_key: &str,
        default: Option<(f64, f64)>,
    ) -> Result<PowerPair, ConfigError> {
        let need = |key: &str, d: Option<f64>| -> Result<f64, ConfigError> {
            self.float(key)?
                .or(d)
                .ok_or_else(|| ConfigError::at(key, "required"))
        };
        let p = need(p_key, default.map(|d| d.0))?;
        let q = need(q_key, default.map(|d| d.1))?;
        // report the exponent that breaks the ordering
        let key = if cnls_core::MASS_CRITICAL < p && p < cnls_core::ENERGY_CRITICAL {
            q_key
        } else {
            p_key
        };
        PowerPair::new(p, q).map_err(|e| ConfigError::at(key, e.to_string()))
    }

    fn mass_spec(&self, pq: PowerPair) -> Result<MassSpec, ConfigError> {
        match (self.positive("rho")?, self.positive("rho_fraction")?) {
            (Some(r), None) => Ok(MassSpec::Absolute(r)),
            (None, Some(f)) => {
                if pq.regime() != Regime::MassSubcritical {
                    return Err(ConfigError::at(
                        "rho_fraction",
                        "no finite critical mass for q >= 7/3",
                    ));
                }
                Ok(MassSpec::OfCritical(f))
            }
            (Some(_), Some(_)) => Err(ConfigError::at(
                "rho_fraction",
                "give either rho or rho_fraction",
            )),
            (None, None) => Err(ConfigError::at("rho", "required (or rho_fraction)")),
        }
    }
}

fn parse_float(key: &str, s: &str) -> Result<f64, ConfigError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| ConfigError::at(key, format!("`{s}` is not a number")))
}

/// Round-trip formatting used in every record: 17 significant digits.
pub fn exact(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn list_text(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| exact(*v))
        .collect::<Vec<_>>()
        .join(",")
}

fn mass_text(spec: MassSpec) -> (&'static str, String) {
    match spec {
        MassSpec::Absolute(r) => ("rho", exact(r)),
        MassSpec::OfCritical(f) => ("rho_fraction", exact(f)),
    }
}

impl ExperimentConfig {
    /// Every parameter that affects results, in canonical form.
    pub fn parameters(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("command", self.command.name().to_string());
        put("rmax", exact(self.grid.r_max()));
        put("n", self.grid.intervals().to_string());
        if let Some(pq) = self.pq {
            put("p", exact(pq.p()));
            put("q", exact(pq.q()));
        }
        match &self.task {
            Task::Static => {}
            Task::Fiber { source } => match *source {
                FiberSource::Gaussian { amplitude, width } => {
                    put("source", "gaussian".into());
                    put("amplitude", exact(amplitude));
                    put("width", exact(width));
                }
                FiberSource::Static => put("source", "static".into()),
            },
            Task::GroundState { targets } => match targets {
                Targets::Masses(m) => put("masses", list_text(m)),
                Targets::Frequencies(w) => put("omegas", list_text(w)),
            },
            Task::Curve { masses } => put("masses", list_text(masses)),
            Task::Evolve {
                datum,
                t_end,
                dt,
                sample_every,
            } => {
                match *datum {
                    Datum::Gaussian { amplitude, width } => {
                        put("datum", "gaussian".into());
                        put("amplitude", exact(amplitude));
                        put("width", exact(width));
                    }
                    Datum::GroundState { rho, mu_scale } => {
                        put("datum", "ground_state".into());
                        let (k, v) = mass_text(rho);
                        put(k, v);
                        put("mu_scale", exact(mu_scale));
                    }
                }
                put("t_end", exact(*t_end));
                put("dt", exact(*dt));
                put("sample_every", sample_every.to_string());
            }
            Task::Dichotomy {
                rho,
                mu_scale,
                horizon,
                dt,
                sample_every,
            } => {
                let (k, v) = mass_text(*rho);
                put(k, v);
                put("mu_scale", exact(*mu_scale));
                put("t_end", exact(*horizon));
                put("dt", exact(*dt));
                put("sample_every", sample_every.to_string());
            }
            Task::Figure { left, right } => {
                for (side, panel) in [("left", left), ("right", right)] {
                    put(&format!("{side}_p"), exact(panel.pq.p()));
                    put(&format!("{side}_q"), exact(panel.pq.q()));
                    put(
                        &format!("{side}_masses"),
                        panel
                            .masses
                            .as_ref()
                            .map_or_else(|| "default".to_string(), |m| list_text(m)),
                    );
                }
            }
        }
        m
    }

    /// SHA-256 of the canonical parameter listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(concat!("cnls ", env!("CARGO_PKG_VERSION"), "\n"));
        for (k, v) in self.parameters() {
            h.update(format!("{k}={v}\n"));
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str, command: Command) -> Result<ExperimentConfig, ConfigError> {
        RawConfig::from_ini_str(text, command)?.resolve(command)
    }

    #[test]
    fn command_section_and_flags_override_in_order() {
        let text = "p = 3\nq = 2\nmasses = 1, 2\n[curve]\nmasses = 3, 4\n[static]\nn = 1024\n";
        let mut raw = RawConfig::from_ini_str(text, Command::Curve).unwrap();
        assert_eq!(raw.get("masses"), Some("3, 4"));
        assert_eq!(raw.get("n"), None);
        raw.set("masses", "5");
        let cfg = raw.resolve(Command::Curve).unwrap();
        assert_eq!(cfg.task, Task::Curve { masses: vec![5.0] });
        assert_eq!(cfg.grid, RadialGrid::stationary());
    }

    #[test]
    fn failures_name_their_key() {
        let key = |text: &str, c| resolve(text, c).unwrap_err().key;
        assert_eq!(key("p = 3\nq = 4\n", Command::Static).as_deref(), Some("q"));
        assert_eq!(key("p = 6\nq = 2\n", Command::Static).as_deref(), Some("p"));
        assert_eq!(
            key(
                "p = 3\nq = 2\nn = 1000\nmu_scale = 1\nrho = 1\n",
                Command::Dichotomy
            )
            .as_deref(),
            Some("n")
        );
        assert_eq!(
            key("p = 3\nq = 2\nmasses = 2, 1\n", Command::Curve).as_deref(),
            Some("masses")
        );
        assert_eq!(
            key("p = 3\nq = 2\nmasss = 1\n", Command::Curve).as_deref(),
            Some("masss")
        );
        assert_eq!(
            key("p = 3\nq = 2\n[curve]\ndt = 1\n", Command::Curve).as_deref(),
            Some("dt")
        );
        assert_eq!(
            key(
                "p = 3\nq = 2.5\nrho_fraction = 0.8\nmu_scale = 1\n",
                Command::Dichotomy
            )
            .as_deref(),
            Some("rho_fraction")
        );
        assert_eq!(
            key("left_q = 2.5\n", Command::Figure).as_deref(),
            Some("left_q")
        );
        assert_eq!(key("p = 3\nq = x\n", Command::Static).as_deref(), Some("q"));
    }

    #[test]
    fn hash_tracks_results_not_locations() {
        let a = resolve(
            "p = 3\nq = 2\nmasses = 1\nout = a\njobs = 2\n",
            Command::Curve,
        )
        .unwrap();
        let b = resolve("p = 3.0\nq = 2\nmasses = 1.0\nout = b\n", Command::Curve).unwrap();
        let c = resolve("p = 3\nq = 2\nmasses = 1.0000001\n", Command::Curve).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn empty_mass_list_is_allowed() {
        let cfg = resolve("p = 3\nq = 2\nmasses =\n", Command::Curve).unwrap();
        assert_eq!(cfg.task, Task::Curve { masses: vec![] });
        let fig = resolve("left_masses =\n", Command::Figure).unwrap();
        let Task::Figure { left, right } = fig.task else {
            panic!()
        };
        assert_eq!(left.masses, Some(vec![]));
        assert_eq!(right.masses, None);
    }

    #[test]
    fn exact_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 7.47190e3, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(exact(x).parse::<f64>().unwrap(), x);
        }
    }
}
