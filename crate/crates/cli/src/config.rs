//! Flat `key = value` run configuration.
//!
//! A config file holds one assignment per line; `#` starts a comment.
//! Command-line flags are applied on top as further assignments, so every run
//! is described by one ordered key/value map. [`RunConfig::to_pairs`] writes
//! the resolved configuration back out and parses to an equal value.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ranksel_core::models::LEARNER_NAMES;
use ranksel_core::ranksum::Projection;
use ranksel_core::select::SelectionConfig;
use ranksel_core::simlab::SimMethod;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Select,
    Panel,
    Simulate,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Select => "select",
            Self::Panel => "panel",
            Self::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimCase {
    Case1,
    Case2,
}

impl SimCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Case1 => "case1",
            Self::Case2 => "case2",
        }
    }
}

/// Loss used to score out-of-sample residuals in `select`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Absolute,
    Huber,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Squared => "squared",
            Self::Absolute => "absolute",
            Self::Huber => "huber",
        }
    }
}

pub const KEYS: [&str; 26] = [
    "command", "case", "data", "response", "learners", "loss", "losses", "out", "seed", "threads",
    "alpha", "alpha_screen", "s", "draws", "folds", "projection", "screening", "k_path", "n",
    "x_df", "reps", "p", "noise_df", "rho", "methods", "config",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub case: Option<SimCase>,
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub learners: Vec<String>,
    pub loss: LossKind,
    pub losses: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub alpha: f64,
    pub alpha_screen: f64,
    pub s: f64,
    pub draws: usize,
    pub folds: usize,
    pub projection: Projection,
    pub screening: bool,
    pub k_path: Option<usize>,
    pub n: Vec<usize>,
    pub x_df: Option<f64>,
    pub reps: Option<usize>,
    pub p: Option<usize>,
    pub noise_df: Option<f64>,
    pub rho: Option<f64>,
    pub methods: Vec<SimMethod>,
}

/// Parses `key = value` lines. Later assignments override earlier ones.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected key = value, got {raw:?}",
                i + 1
            )));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_kv_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_kv(&text).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("invalid value {v:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid boolean {v:?} for {key}"))),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Builds a configuration from assignments; the last value of a key wins.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, CliError> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("unknown config key {k:?}")));
            }
            map.insert(k.as_str(), v.as_str());
        }
        let command = match map.get("command").copied() {
            Some("select") => Command::Select,
            Some("panel") => Command::Panel,
            Some("simulate") => Command::Simulate,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown command {other:?} (expected select, panel, simulate)"
                )))
            }
            None => return Err(CliError::Usage("missing command".into())),
        };
        let case = match map.get("case").copied() {
            None => None,
            Some("case1") => Some(SimCase::Case1),
            Some("case2") => Some(SimCase::Case2),
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown case {other:?} (expected case1 or case2)"
                )))
            }
        };
        let seed = match map.get("seed") {
            Some(v) => parse("seed", v)?,
            None => {
                return Err(CliError::Usage(
                    "a seed is required (--seed or `seed = ...` in the config)".into(),
                ))
            }
        };
        let loss = match map.get("loss").copied().unwrap_or("huber") {
            "squared" => LossKind::Squared,
            "absolute" => LossKind::Absolute,
            "huber" => LossKind::Huber,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown loss {other:?} (expected squared, absolute, huber)"
                )))
            }
        };
        let defaults = SelectionConfig::default();
        let opt = |k: &str| map.get(k).copied();
        let cfg = RunConfig {
            command,
            case,
            data: opt("data").map(PathBuf::from),
            response: opt("response").map(str::to_string),
            learners: opt("learners")
                .map(|v| parse_list::<String>("learners", v))
                .transpose()?
                .unwrap_or_default(),
            loss,
            losses: opt("losses").map(PathBuf::from),
            out: opt("out").map(PathBuf::from),
            seed,
            threads: opt("threads").map(|v| parse("threads", v)).transpose()?.unwrap_or(0),
            alpha: opt("alpha").map(|v| parse("alpha", v)).transpose()?.unwrap_or(defaults.alpha),
            alpha_screen: opt("alpha_screen")
                .map(|v| parse("alpha_screen", v))
                .transpose()?
                .unwrap_or(defaults.alpha_screen),
            s: opt("s").map(|v| parse("s", v)).transpose()?.unwrap_or(defaults.s),
            draws: opt("draws").map(|v| parse("draws", v)).transpose()?.unwrap_or(defaults.draws),
            folds: opt("folds").map(|v| parse("folds", v)).transpose()?.unwrap_or(defaults.folds),
            projection: opt("projection")
                .map(|v| parse("projection", v))
                .transpose()?
                .unwrap_or(defaults.projection),
            screening: opt("screening")
                .map(|v| parse_bool("screening", v))
                .transpose()?
                .unwrap_or(defaults.screening),
            k_path: opt("k_path").map(|v| parse("k_path", v)).transpose()?,
            n: opt("n").map(|v| parse_list("n", v)).transpose()?.unwrap_or_default(),
            x_df: opt("x_df").map(|v| parse("x_df", v)).transpose()?,
            reps: opt("reps").map(|v| parse("reps", v)).transpose()?,
            p: opt("p").map(|v| parse("p", v)).transpose()?,
            noise_df: opt("noise_df").map(|v| parse("noise_df", v)).transpose()?,
            rho: opt("rho").map(|v| parse("rho", v)).transpose()?,
            methods: opt("methods")
                .map(|v| parse_list("methods", v))
                .transpose()?
                .unwrap_or_else(|| SimMethod::ALL.to_vec()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every resolved setting as `(key, value)` in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = vec![("command", self.command.as_str().into())];
        if let Some(c) = self.case {
            out.push(("case", c.as_str().into()));
        }
        let path = |p: &PathBuf| p.to_string_lossy().into_owned();
        if let Some(p) = &self.data {
            out.push(("data", path(p)));
        }
        if let Some(r) = &self.response {
            out.push(("response", r.clone()));
        }
        if !self.learners.is_empty() {
            out.push(("learners", self.learners.join(",")));
        }
        out.push(("loss", self.loss.as_str().into()));
        if let Some(p) = &self.losses {
            out.push(("losses", path(p)));
        }
        if let Some(p) = &self.out {
            out.push(("out", path(p)));
        }
        out.push(("seed", self.seed.to_string()));
        out.push(("threads", self.threads.to_string()));
        out.push(("alpha", self.alpha.to_string()));
        out.push(("alpha_screen", self.alpha_screen.to_string()));
        out.push(("s", self.s.to_string()));
        out.push(("draws", self.draws.to_string()));
        out.push(("folds", self.folds.to_string()));
        out.push(("projection", self.projection.to_string()));
        out.push(("screening", self.screening.to_string()));
        if let Some(k) = self.k_path {
            out.push(("k_path", k.to_string()));
        }
        if !self.n.is_empty() {
            out.push(("n", join(&self.n)));
        }
        if let Some(v) = self.x_df {
            out.push(("x_df", v.to_string()));
        }
        if let Some(v) = self.reps {
            out.push(("reps", v.to_string()));
        }
        if let Some(v) = self.p {
            out.push(("p", v.to_string()));
        }
        if let Some(v) = self.noise_df {
            out.push(("noise_df", v.to_string()));
        }
        if let Some(v) = self.rho {
            out.push(("rho", v.to_string()));
        }
        out.push(("methods", join(&self.methods)));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// The configuration as `key = value` text accepted by [`parse_kv`].
    pub fn to_kv_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            alpha: self.alpha,
            alpha_screen: self.alpha_screen,
            s: self.s,
            draws: self.draws,
            folds: self.folds,
            seed: self.seed,
            projection: self.projection,
            screening: self.screening,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        self.selection()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Usage(format!("{} requires {what}", self.command.as_str())))
            }
        };
        match self.command {
            Command::Select => {
                need(self.data.is_some(), "--data <csv>")?;
                need(self.response.is_some(), "--response <column>")?;
                if self.learners.is_empty() {
                    return Err(CliError::Usage(
                        "empty candidate list: pass --learners (ols, huber, huber_lasso)".into(),
                    ));
                }
                for l in &self.learners {
                    if !LEARNER_NAMES.contains(&l.as_str()) {
                        return Err(CliError::Usage(format!(
                            "unknown learner {l:?} (expected one of {})",
                            LEARNER_NAMES.join(", ")
                        )));
                    }
                }
            }
            Command::Panel => need(self.losses.is_some(), "--losses <csv>")?,
            Command::Simulate => {
                need(self.case.is_some(), "a case (case1 or case2)")?;
                if self.methods.is_empty() {
                    return Err(CliError::Usage("methods must not be empty".into()));
                }
            }
        }
        for p in [&self.data, &self.losses].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Usage(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_kv(text).unwrap()
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_pairs(&pairs(
            "command = simulate\ncase = case1 # comment\nseed = 7\nn = 40, 80\nalpha = 0.05\nx_df = 2\nmethods = rsr,cv\nscreening = on\n",
        ))
        .unwrap();
        assert_eq!(cfg.n, vec![40, 80]);
        assert_eq!(cfg.methods, vec![SimMethod::Rsr, SimMethod::Cv]);
        let again = RunConfig::from_pairs(&parse_kv(&cfg.to_kv_text()).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn golden_echo() {
        let cfg = RunConfig::from_pairs(&pairs("command = simulate\ncase = case2\nseed = 3\nrho = 0.25\n")).unwrap();
        let golden = "command = simulate\ncase = case2\nloss = huber\nseed = 3\nthreads = 0\nalpha = 0.1\nalpha_screen = 0.1\ns = 0.01\ndraws = 500\nfolds = 5\nprojection = symmetrized\nscreening = false\nrho = 0.25\nmethods = cv,cvc_style,pcv,rsr\n";
        assert_eq!(cfg.to_kv_text(), golden);
    }

    #[test]
    fn seed_is_mandatory() {
        let err = RunConfig::from_pairs(&pairs("command = simulate\ncase = case1\n")).unwrap_err();
        assert!(err.to_string().contains("seed"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "command = simulate\ncase = case1\nseed = 1\nalpha = 1.5\n",
            "command = simulate\ncase = case3\nseed = 1\n",
            "command = simulate\ncase = case1\nseed = 1\nbogus = 2\n",
            "command = select\nseed = 1\n",
            "command = simulate\ncase = case1\nseed = x\n",
        ] {
            assert!(RunConfig::from_pairs(&pairs(text)).is_err(), "{text}");
        }
        assert!(parse_kv("no equals sign").is_err());
    }
}
