//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Lists
//! are comma separated; an empty value means "automatic" for optional keys.

use std::fmt;
use std::path::PathBuf;

use bandlab::kernels::Filter;
use bandlab::manifold::Manifold;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Every key with its help text, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("manifold", "circle | torus2 | sphere2 | product(M,M)"),
    ("L", "bandwidth grid, comma separated"),
    ("R", "ball radius grid in units of 1/L, comma separated"),
    ("eps", "cutoff / product / dilation parameter ε"),
    ("rho", "bandwidth dilation ρ for the interpolation-side spectrum"),
    ("nu", "oversampling factor of grid and random families"),
    ("gammas", "eigenvalue thresholds γ"),
    ("deltas", "eigenvalue thresholds δ"),
    ("t", "annulus width for Landau counts (empty: 3/s)"),
    ("seed", "seed of every random stream"),
    ("filter", "sharp | br:N | smooth:ε | smooth_squared:ε"),
    ("exponent", "decay exponent N"),
    ("trials", "random functions per bandwidth"),
    ("family", "grid | random | perturbed | fekete"),
    ("family_file", "load the family from this file instead"),
    ("perturb", "perturbation size δ for perturbed families"),
    ("separate", "extract a subfamily with this separation (0: off)"),
    ("candidates", "Fekete candidate count (empty: 4 k_L)"),
    ("exchange_rounds", "Fekete exchange passes"),
    ("dilation", "ε for the dilated Fekete check (0: off)"),
    ("samples", "random products per admissibility check"),
    ("c_step", "admissibility C grid step"),
    ("c_max", "admissibility C grid end"),
    ("mz_factor", "largest B/A spread for an empirical M-Z verdict"),
    ("ball_radial", "radial nodes of ball rules"),
    ("ball_angular", "angular nodes of ball rules"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub manifold: String,
    pub bandwidths: Vec<f64>,
    pub radii: Vec<f64>,
    pub eps: f64,
    pub rho: f64,
    pub nu: f64,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub t: Option<f64>,
    pub seed: u64,
    pub filter: String,
    pub exponent: u32,
    pub trials: usize,
    pub family: String,
    pub family_file: Option<PathBuf>,
    pub perturb: f64,
    pub separate: f64,
    pub candidates: Option<usize>,
    pub exchange_rounds: usize,
    pub dilation: f64,
    pub samples: usize,
    pub c_step: f64,
    pub c_max: f64,
    pub mz_factor: f64,
    pub ball_radial: usize,
    pub ball_angular: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            manifold: "torus2".into(),
            bandwidths: vec![20.0],
            radii: vec![6.0, 8.0],
            eps: 0.2,
            rho: 0.2,
            nu: 1.0,
            gammas: vec![0.1, 0.5, 0.9],
            deltas: vec![0.1, 0.5, 0.9],
            t: None,
            seed: 42,
            filter: "smooth:0.3".into(),
            exponent: 3,
            trials: 50,
            family: "grid".into(),
            family_file: None,
            perturb: 0.1,
            separate: 0.0,
            candidates: None,
            exchange_rounds: 20,
            dilation: 0.0,
            samples: 3,
            c_step: 0.05,
            c_max: 5.0,
            mz_factor: 10.0,
            ball_radial: 64,
            ball_angular: 128,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn show<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "manifold" => self.manifold = v.to_string(),
            "L" => self.bandwidths = parse_list(key, v)?,
            "R" => self.radii = parse_list(key, v)?,
            "eps" => self.eps = parse(key, v)?,
            "rho" => self.rho = parse(key, v)?,
            "nu" => self.nu = parse(key, v)?,
            "gammas" => self.gammas = parse_list(key, v)?,
            "deltas" => self.deltas = parse_list(key, v)?,
            "t" => self.t = optional(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "filter" => self.filter = v.to_string(),
            "exponent" => self.exponent = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "family" => self.family = v.to_string(),
            "family_file" => self.family_file = (!v.is_empty()).then(|| PathBuf::from(v)),
            "perturb" => self.perturb = parse(key, v)?,
            "separate" => self.separate = parse(key, v)?,
            "candidates" => self.candidates = optional(key, v)?,
            "exchange_rounds" => self.exchange_rounds = parse(key, v)?,
            "dilation" => self.dilation = parse(key, v)?,
            "samples" => self.samples = parse(key, v)?,
            "c_step" => self.c_step = parse(key, v)?,
            "c_max" => self.c_max = parse(key, v)?,
            "mz_factor" => self.mz_factor = parse(key, v)?,
            "ball_radial" => self.ball_radial = parse(key, v)?,
            "ball_angular" => self.ball_angular = parse(key, v)?,
            _ => return Err(ConfigError(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        match key {
            "manifold" => self.manifold.clone(),
            "L" => join(&self.bandwidths),
            "R" => join(&self.radii),
            "eps" => self.eps.to_string(),
            "rho" => self.rho.to_string(),
            "nu" => self.nu.to_string(),
            "gammas" => join(&self.gammas),
            "deltas" => join(&self.deltas),
            "t" => show(&self.t),
            "seed" => self.seed.to_string(),
            "filter" => self.filter.clone(),
            "exponent" => self.exponent.to_string(),
            "trials" => self.trials.to_string(),
            "family" => self.family.clone(),
            "family_file" => show(&self.family_file.as_ref().map(|p| p.display().to_string())),
            "perturb" => self.perturb.to_string(),
            "separate" => self.separate.to_string(),
            "candidates" => show(&self.candidates),
            "exchange_rounds" => self.exchange_rounds.to_string(),
            "dilation" => self.dilation.to_string(),
            "samples" => self.samples.to_string(),
            "c_step" => self.c_step.to_string(),
            "c_max" => self.c_max.to_string(),
            "mz_factor" => self.mz_factor.to_string(),
            "ball_radial" => self.ball_radial.to_string(),
            "ball_angular" => self.ball_angular.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|(k, _)| (*k, self.get(k))).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| ConfigError(format!("line {}: {}", n + 1, e.0)))?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn manifold(&self) -> Result<Manifold, ConfigError> {
        self.manifold
            .parse()
            .map_err(|e| ConfigError(format!("key `manifold`: {e}")))
    }

    pub fn filter(&self) -> Result<Filter, ConfigError> {
        let bad = || ConfigError(format!("key `filter`: cannot parse `{}`", self.filter));
        let (name, arg) = match self.filter.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (self.filter.trim(), None),
        };
        let filter = match (name, arg) {
            ("sharp", None) => Filter::Sharp,
            ("br" | "bochner_riesz", Some(a)) => Filter::BochnerRiesz(a.parse().map_err(|_| bad())?),
            ("smooth", Some(a)) => Filter::Smooth(a.parse().map_err(|_| bad())?),
            ("smooth_squared", Some(a)) => Filter::SmoothSquared(a.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        filter.validate().map_err(|e| ConfigError(format!("key `filter`: {e}")))?;
        Ok(filter)
    }

    pub fn c_grid(&self) -> Vec<f64> {
        let n = (self.c_max / self.c_step + 1e-9).floor() as usize;
        (1..=n).map(|i| i as f64 * self.c_step).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.manifold()?;
        self.filter()?;
        for (key, grid) in [("L", &self.bandwidths), ("R", &self.radii), ("gammas", &self.gammas), ("deltas", &self.deltas)] {
            if grid.is_empty() {
                return Err(ConfigError(format!("key `{key}`: grid is empty")));
            }
            if grid.iter().any(|x| !x.is_finite()) {
                return Err(ConfigError(format!("key `{key}`: values must be finite")));
            }
        }
        if !["grid", "random", "perturbed", "fekete"].contains(&self.family.as_str()) {
            return Err(ConfigError(format!("key `family`: unknown kind `{}`", self.family)));
        }
        if !(self.c_step > 0.0) || !(self.c_max >= self.c_step) {
            return Err(ConfigError("keys `c_step`, `c_max`: need 0 < c_step <= c_max".into()));
        }
        if self.ball_radial == 0 || self.ball_angular == 0 {
            return Err(ConfigError("ball rule resolutions must be positive".into()));
        }
        Ok(())
    }
}
