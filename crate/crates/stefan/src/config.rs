//! Run configuration: a flat `key = value` format (a strict subset of
//! TOML), its parser, renderer, and validation.
//!
//! Supported syntax: bare keys, `#` comments, quoted strings, numbers,
//! and single-level arrays `[a, b, c]` of numbers. Every key must be one
//! the schema knows — unknown keys are reported as errors rather than
//! silently ignored, so typos cannot change a run's meaning. `render`
//! emits a canonical form that parses back to an identical configuration.

use crate::rng::Rng;
use crate::simplex::DiffusionTable;
use crate::solver::{init_field, Field, Grid1D, SolverConfig, SolverError};
use crate::thermo::{ModelKind, ModelSpec, ThermoError};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("key `{key}`: {message}")]
    Validation { key: &'static str, message: String },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, message: message.into() }
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key, message: message.into() }
}

/// Shape of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Spatially constant `base`.
    Uniform,
    /// `c_i(x) = base_i + amplitude_i·cos(mode·π·x/L)`.
    Cosine,
    /// Seeded low-mode random combination around `base`, zero-sum across
    /// species at every point.
    RandomSmooth,
}

impl ProfileKind {
    fn parse(s: &str) -> Option<ProfileKind> {
        match s {
            "uniform" => Some(ProfileKind::Uniform),
            "cosine" => Some(ProfileKind::Cosine),
            "random-smooth" => Some(ProfileKind::RandomSmooth),
            _ => None,
        }
    }

    fn id(&self) -> &'static str {
        match self {
            ProfileKind::Uniform => "uniform",
            ProfileKind::Cosine => "cosine",
            ProfileKind::RandomSmooth => "random-smooth",
        }
    }
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub n: usize,
    /// Upper-triangular diffusion coefficients, row by row.
    pub d: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub masses: Option<Vec<f64>>,
    pub cells: usize,
    pub length: f64,
    pub dt_init: f64,
    pub safety: f64,
    pub t_end: f64,
    pub max_rejects: usize,
    pub entropy_tolerance: f64,
    pub snapshot_stride: usize,
    pub seed: u64,
    pub output: String,
    pub profile: ProfileKind,
    pub base: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub mode: usize,
    pub perturb_mode: usize,
    pub perturb_weights: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Value {
    Str(String),
    Scalar(String),
    Array(Vec<String>),
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (idx, ch) in line.char_indices() {
        match ch {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..idx],
            _ => {}
        }
    }
    line
}

fn parse_value(raw: &str, line: usize) -> Result<Value, ConfigError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(parse_err(line, "missing value"));
    }
    if let Some(rest) = raw.strip_prefix('"') {
        let inner = rest
            .strip_suffix('"')
            .ok_or_else(|| parse_err(line, "unterminated string"))?;
        if inner.contains('"') {
            return Err(parse_err(line, "unexpected `\"` inside string"));
        }
        return Ok(Value::Str(inner.to_string()));
    }
    if let Some(rest) = raw.strip_prefix('[') {
        let inner = rest
            .strip_suffix(']')
            .ok_or_else(|| parse_err(line, "unterminated array"))?;
        let items: Vec<String> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(|s| s.trim().to_string()).collect()
        };
        for item in &items {
            if item.is_empty() {
                return Err(parse_err(line, "empty array element"));
            }
        }
        return Ok(Value::Array(items));
    }
    if raw.contains(char::is_whitespace) {
        return Err(parse_err(line, format!("malformed value `{raw}`")));
    }
    Ok(Value::Scalar(raw.to_string()))
}

struct RawConfig {
    entries: BTreeMap<String, (usize, Value)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, full_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(full_line).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(parse_err(line_no, format!("malformed key `{key}`")));
            }
            let value = parse_value(value, line_no)?;
            if entries.insert(key.to_string(), (line_no, value)).is_some() {
                return Err(parse_err(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, Value)> {
        self.entries.remove(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(parse_err(line, format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

fn scalar_f64(key: &'static str, line: usize, token: &str) -> Result<f64, ConfigError> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("`{key}` expects a number, got `{token}`")))
}

fn scalar_u64(key: &'static str, line: usize, token: &str) -> Result<u64, ConfigError> {
    token
        .parse::<u64>()
        .map_err(|_| parse_err(line, format!("`{key}` expects a nonnegative integer, got `{token}`")))
}

struct Extractor {
    raw: RawConfig,
}

impl Extractor {
    fn f64_opt(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.raw.take(key) {
            None => Ok(None),
            Some((line, Value::Scalar(tok))) => Ok(Some(scalar_f64(key, line, &tok)?)),
            Some((line, _)) => Err(parse_err(line, format!("`{key}` expects a number"))),
        }
    }

    fn f64_or(&mut self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?.ok_or_else(|| invalid(key, "required"))
    }

    fn u64_opt(&mut self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        match self.raw.take(key) {
            None => Ok(None),
            Some((line, Value::Scalar(tok))) => Ok(Some(scalar_u64(key, line, &tok)?)),
            Some((line, _)) => Err(parse_err(line, format!("`{key}` expects an integer"))),
        }
    }

    fn usize_req(&mut self, key: &'static str) -> Result<usize, ConfigError> {
        Ok(self.u64_opt(key)?.ok_or_else(|| invalid(key, "required"))? as usize)
    }

    fn usize_or(&mut self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.u64_opt(key)?.map(|v| v as usize).unwrap_or(default))
    }

    fn str_opt(&mut self, key: &'static str) -> Result<Option<String>, ConfigError> {
        match self.raw.take(key) {
            None => Ok(None),
            Some((_, Value::Str(s))) => Ok(Some(s)),
            Some((line, _)) => Err(parse_err(line, format!("`{key}` expects a quoted string"))),
        }
    }

    fn array_opt(&mut self, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw.take(key) {
            None => Ok(None),
            Some((line, Value::Array(items))) => {
                let mut out = Vec::with_capacity(items.len());
                for tok in &items {
                    out.push(scalar_f64(key, line, tok)?);
                }
                Ok(Some(out))
            }
            Some((line, _)) => Err(parse_err(line, format!("`{key}` expects an array"))),
        }
    }
}

/// Parses and validates a configuration from its textual form.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw = RawConfig::parse(text)?;
    let mut ex = Extractor { raw };

    let model_str = ex.str_opt("model")?.ok_or_else(|| invalid("model", "required"))?;
    let model = ModelKind::parse(&model_str)
        .ok_or_else(|| invalid("model", format!("unknown model `{model_str}`")))?;
    let n = ex.usize_req("n")?;
    if !(2..=16).contains(&n) {
        return Err(invalid("n", "species count must lie in 2..=16"));
    }

    let d = ex.array_opt("d")?;
    let gamma = ex.f64_opt("gamma")?;
    let beta = ex.f64_opt("beta")?;
    let theta = ex.f64_opt("theta")?;
    let masses = ex.array_opt("masses")?;

    let cells = ex.usize_req("cells")?;
    let length = ex.f64_req("length")?;
    let dt_init = ex.f64_req("dt_init")?;
    let t_end = ex.f64_req("t_end")?;
    let safety = ex.f64_or("safety", 0.4)?;
    let max_rejects = ex.usize_or("max_rejects", 40)?;
    let entropy_tolerance = ex.f64_or("entropy_tolerance", 1e-10)?;
    let snapshot_stride = ex.usize_or("snapshot_stride", 10)?;
    let seed = ex.u64_opt("seed")?.unwrap_or(0);
    let output = ex.str_opt("output")?.unwrap_or_else(|| "run.csv".to_string());

    let profile_str = ex.str_opt("profile")?.unwrap_or_else(|| "uniform".to_string());
    let profile = ProfileKind::parse(&profile_str)
        .ok_or_else(|| invalid("profile", format!("unknown profile `{profile_str}`")))?;
    let base = ex.array_opt("base")?.ok_or_else(|| invalid("base", "required"))?;
    let amplitude = ex.array_opt("amplitude")?.unwrap_or_default();
    let mode = ex.usize_or("mode", 1)?;
    let perturb_mode = ex.usize_or("perturb_mode", 2)?;
    let perturb_weights = ex.array_opt("perturb_weights")?.unwrap_or_else(|| {
        let mut w = vec![0.0; n];
        w[0] = 1.0;
        w[1] = -1.0;
        w
    });

    ex.raw.finish()?;

    let cfg = RunConfig {
        model,
        n,
        d,
        gamma,
        beta,
        theta,
        masses,
        cells,
        length,
        dt_init,
        safety,
        t_end,
        max_rejects,
        entropy_tolerance,
        snapshot_stride,
        seed,
        output,
        profile,
        base,
        amplitude,
        mode,
        perturb_mode,
        perturb_weights,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let n = cfg.n;
    let pairs = n * (n - 1) / 2;
    match cfg.model {
        ModelKind::ClassicMs | ModelKind::Pvd | ModelKind::PorousMedium => {
            let d = cfg
                .d
                .as_ref()
                .ok_or_else(|| invalid("d", "required for this model"))?;
            if d.len() != pairs {
                return Err(invalid(
                    "d",
                    format!("needs exactly n(n-1)/2 = {pairs} entries, got {}", d.len()),
                ));
            }
            if d.iter().any(|&v| !(v > 0.0)) {
                return Err(invalid("d", "all entries must be positive"));
            }
        }
        ModelKind::MolarMass | ModelKind::Tumor => {
            if cfg.d.is_some() {
                return Err(invalid("d", "not accepted for this model"));
            }
        }
    }
    match cfg.model {
        ModelKind::PorousMedium => {
            let g = cfg.gamma.ok_or_else(|| invalid("gamma", "required for porous-medium"))?;
            if !(g > 1.0) {
                return Err(invalid("gamma", "must exceed 1"));
            }
        }
        _ if cfg.gamma.is_some() => {
            return Err(invalid("gamma", "only accepted for porous-medium"));
        }
        _ => {}
    }
    match cfg.model {
        ModelKind::Tumor => {
            let b = cfg.beta.ok_or_else(|| invalid("beta", "required for tumor"))?;
            if !(b > 0.0) {
                return Err(invalid("beta", "must be positive"));
            }
            let t = cfg.theta.ok_or_else(|| invalid("theta", "required for tumor"))?;
            if !(t >= 0.0) {
                return Err(invalid("theta", "must be nonnegative"));
            }
            if n != 3 {
                return Err(invalid("n", "tumor model requires n = 3"));
            }
        }
        _ => {
            if cfg.beta.is_some() {
                return Err(invalid("beta", "only accepted for tumor"));
            }
            if cfg.theta.is_some() {
                return Err(invalid("theta", "only accepted for tumor"));
            }
        }
    }
    match cfg.model {
        ModelKind::MolarMass => {
            let m = cfg.masses.as_ref().ok_or_else(|| invalid("masses", "required for molar-mass"))?;
            if m.len() != n {
                return Err(invalid("masses", format!("needs {n} entries, got {}", m.len())));
            }
            if m.iter().any(|&v| !(v > 0.0)) {
                return Err(invalid("masses", "all entries must be positive"));
            }
        }
        _ if cfg.masses.is_some() => {
            return Err(invalid("masses", "only accepted for molar-mass"));
        }
        _ => {}
    }

    if cfg.cells < 4 {
        return Err(invalid("cells", "need at least 4 cells"));
    }
    if !(cfg.length > 0.0) {
        return Err(invalid("length", "must be positive"));
    }
    if !(cfg.dt_init > 0.0) {
        return Err(invalid("dt_init", "must be positive"));
    }
    if !(cfg.t_end >= 0.0) {
        return Err(invalid("t_end", "must be nonnegative"));
    }
    if !(cfg.safety > 0.0 && cfg.safety <= 1.0) {
        return Err(invalid("safety", "must lie in (0, 1]"));
    }
    if cfg.max_rejects == 0 {
        return Err(invalid("max_rejects", "must be at least 1"));
    }
    if !(cfg.entropy_tolerance >= 0.0) {
        return Err(invalid("entropy_tolerance", "must be nonnegative"));
    }
    if cfg.snapshot_stride == 0 {
        return Err(invalid("snapshot_stride", "must be at least 1"));
    }

    if cfg.base.len() != n {
        return Err(invalid("base", format!("needs {n} entries, got {}", cfg.base.len())));
    }
    let base_sum: f64 = cfg.base.iter().sum();
    if cfg.base.iter().any(|&v| v < 0.0) || (base_sum - 1.0).abs() > 1e-9 {
        return Err(invalid("base", "must be a composition summing to 1"));
    }
    match cfg.profile {
        ProfileKind::Uniform => {
            if !cfg.amplitude.is_empty() {
                return Err(invalid("amplitude", "not accepted for a uniform profile"));
            }
        }
        ProfileKind::Cosine | ProfileKind::RandomSmooth => {
            if cfg.amplitude.len() != n {
                return Err(invalid(
                    "amplitude",
                    format!("needs {n} entries, got {}", cfg.amplitude.len()),
                ));
            }
        }
    }
    if cfg.mode == 0 {
        return Err(invalid("mode", "must be at least 1"));
    }
    if cfg.perturb_mode == 0 {
        return Err(invalid("perturb_mode", "must be at least 1"));
    }
    if cfg.perturb_weights.len() != n {
        return Err(invalid(
            "perturb_weights",
            format!("needs {n} entries, got {}", cfg.perturb_weights.len()),
        ));
    }
    Ok(())
}

fn push_f64(out: &mut String, key: &str, v: f64) {
    out.push_str(&format!("{key} = {v:?}\n"));
}

fn push_array(out: &mut String, key: &str, vs: &[f64]) {
    let items: Vec<String> = vs.iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&format!("{key} = [{}]\n", items.join(", ")));
}

/// Renders a configuration to its canonical textual form; parsing the
/// result reproduces the configuration exactly.
pub fn render(cfg: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("model = \"{}\"\n", cfg.model.id()));
    out.push_str(&format!("n = {}\n", cfg.n));
    if let Some(d) = &cfg.d {
        push_array(&mut out, "d", d);
    }
    if let Some(g) = cfg.gamma {
        push_f64(&mut out, "gamma", g);
    }
    if let Some(b) = cfg.beta {
        push_f64(&mut out, "beta", b);
    }
    if let Some(t) = cfg.theta {
        push_f64(&mut out, "theta", t);
    }
    if let Some(m) = &cfg.masses {
        push_array(&mut out, "masses", m);
    }
    out.push_str(&format!("cells = {}\n", cfg.cells));
    push_f64(&mut out, "length", cfg.length);
    push_f64(&mut out, "dt_init", cfg.dt_init);
    push_f64(&mut out, "safety", cfg.safety);
    push_f64(&mut out, "t_end", cfg.t_end);
    out.push_str(&format!("max_rejects = {}\n", cfg.max_rejects));
    push_f64(&mut out, "entropy_tolerance", cfg.entropy_tolerance);
    out.push_str(&format!("snapshot_stride = {}\n", cfg.snapshot_stride));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!("output = \"{}\"\n", cfg.output));
    out.push_str(&format!("profile = \"{}\"\n", cfg.profile.id()));
    push_array(&mut out, "base", &cfg.base);
    if !cfg.amplitude.is_empty() {
        push_array(&mut out, "amplitude", &cfg.amplitude);
    }
    out.push_str(&format!("mode = {}\n", cfg.mode));
    out.push_str(&format!("perturb_mode = {}\n", cfg.perturb_mode));
    push_array(&mut out, "perturb_weights", &cfg.perturb_weights);
    out
}

impl RunConfig {
    /// The model specification this configuration describes.
    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        Ok(match self.model {
            ModelKind::ClassicMs => ModelSpec::classic(self.n)?,
            ModelKind::Pvd => ModelSpec::pvd(self.n)?,
            ModelKind::PorousMedium => ModelSpec::porous(self.n, self.gamma.unwrap())?,
            ModelKind::Tumor => ModelSpec::tumor(self.beta.unwrap(), self.theta.unwrap())?,
            ModelKind::MolarMass => ModelSpec::molar_mass(self.masses.as_ref().unwrap())?,
        })
    }

    /// The diffusion table, when the model uses one.
    pub fn diffusion_table(&self) -> Result<Option<DiffusionTable>, ConfigError> {
        match &self.d {
            Some(d) => Ok(Some(
                DiffusionTable::from_upper_triangle(self.n, d)
                    .map_err(|e| invalid("d", e.to_string()))?,
            )),
            None => Ok(None),
        }
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        Ok(Grid1D::new(self.cells, self.length)?)
    }

    /// Assembles the solver configuration.
    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let mut sc = SolverConfig::new(
            self.model_spec()?,
            self.diffusion_table()?,
            self.dt_init,
            self.t_end,
        );
        sc.safety = self.safety;
        sc.max_rejects = self.max_rejects;
        sc.entropy_tolerance = self.entropy_tolerance;
        Ok(sc)
    }

    /// Builds the initial field from the profile specification.
    pub fn initial_field(&self) -> Result<Field, ConfigError> {
        let grid = self.grid()?;
        let n = self.n;
        let length = self.length;
        match self.profile {
            ProfileKind::Uniform => {
                let base = self.base.clone();
                Ok(init_field(grid, n, move |_| base.clone())?)
            }
            ProfileKind::Cosine => {
                let base = self.base.clone();
                let amp = self.amplitude.clone();
                let mode = self.mode as f64;
                Ok(init_field(grid, n, move |x| {
                    (0..n)
                        .map(|i| base[i] + amp[i] * (mode * PI * x / length).cos())
                        .collect()
                })?)
            }
            ProfileKind::RandomSmooth => {
                // Three seeded low modes per species, made zero-sum across
                // species pointwise so every cell stays on the simplex.
                let mut rng = Rng::new(self.seed);
                let coeff: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
                    .collect();
                let base = self.base.clone();
                let amp = self.amplitude.clone();
                Ok(init_field(grid, n, move |x| {
                    let mut v: Vec<f64> = (0..n)
                        .map(|i| {
                            let phi: f64 = (0..3)
                                .map(|k| {
                                    coeff[i][k] * ((k as f64 + 1.0) * PI * x / length).cos()
                                })
                                .sum();
                            amp[i] * phi
                        })
                        .collect();
                    let mean = v.iter().sum::<f64>() / n as f64;
                    for vi in v.iter_mut() {
                        *vi -= mean;
                    }
                    (0..n).map(|i| base[i] + v[i]).collect()
                })?)
            }
        }
    }

    /// The zero-sum perturbation mode used by sweeps:
    /// `φ_i(x) = w_i·cos(perturb_mode·π·x/L)` with the species mean removed
    /// at application time.
    pub fn perturbation_mode(&self) -> impl Fn(f64, usize) -> f64 + '_ {
        let mode = self.perturb_mode as f64;
        let length = self.length;
        move |x: f64, i: usize| self.perturb_weights[i] * (mode * PI * x / length).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
# minimal binary run
model = "classic-ms"
n = 2
d = [1.0]
cells = 50
length = 1.0
dt_init = 1e-6
t_end = 0.1
base = [0.5, 0.5]
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.model, ModelKind::ClassicMs);
        assert_eq!(cfg.n, 2);
        assert_eq!(cfg.d.as_deref(), Some(&[1.0][..]));
        assert_eq!(cfg.cells, 50);
        assert_eq!(cfg.safety, 0.4);
        assert_eq!(cfg.max_rejects, 40);
        assert_eq!(cfg.entropy_tolerance, 1e-10);
        assert_eq!(cfg.snapshot_stride, 10);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.profile, ProfileKind::Uniform);
        assert_eq!(cfg.perturb_weights, vec![1.0, -1.0]);
    }

    #[test]
    fn round_trips_through_render() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&render(&cfg)).unwrap(), cfg);

        cfg.profile = ProfileKind::Cosine;
        cfg.amplitude = vec![0.1, -0.1];
        cfg.seed = 42;
        cfg.dt_init = 2.5e-7;
        assert_eq!(parse_config(&render(&cfg)).unwrap(), cfg);

        let porous = parse_config(
            r#"
model = "porous-medium"
n = 2
d = [1.0]
gamma = 2.0
cells = 16
length = 1.0
dt_init = 1e-6
t_end = 0.01
base = [0.5, 0.5]
profile = "cosine"
amplitude = [0.05, -0.05]
"#,
        )
        .unwrap();
        assert_eq!(parse_config(&render(&porous)).unwrap(), porous);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let text = format!("{MINIMAL}\nwobble = 3\n");
        match parse_config(&text) {
            Err(ConfigError::Parse { message, .. }) => assert!(message.contains("wobble")),
            other => panic!("expected parse error, got {other:?}"),
        }
        let dup = format!("{MINIMAL}\nn = 3\n");
        assert!(matches!(parse_config(&dup), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn reports_line_numbers() {
        let text = "model = \"classic-ms\"\nn = two\n";
        match parse_config(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validates_model_parameters() {
        let missing_gamma = MINIMAL.replace("\"classic-ms\"", "\"porous-medium\"");
        match parse_config(&missing_gamma) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "gamma"),
            other => panic!("expected gamma validation error, got {other:?}"),
        }

        let wrong_d = MINIMAL.replace("d = [1.0]", "d = [1.0, 2.0]");
        match parse_config(&wrong_d) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "d"),
            other => panic!("expected d validation error, got {other:?}"),
        }

        let molar_with_d = MINIMAL.replace("\"classic-ms\"", "\"molar-mass\"");
        match parse_config(&molar_with_d) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "d"),
            other => panic!("expected d rejection, got {other:?}"),
        }

        let stray_gamma = format!("{MINIMAL}\ngamma = 2.0\n");
        match parse_config(&stray_gamma) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "gamma"),
            other => panic!("expected gamma rejection, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_strings_interact() {
        let text = MINIMAL.replace(
            "base = [0.5, 0.5]",
            "base = [0.5, 0.5] # trailing note\noutput = \"has#hash.csv\"",
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.output, "has#hash.csv");
    }

    #[test]
    fn initial_field_profiles() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        let uniform = cfg.initial_field().unwrap();
        assert!(uniform.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));

        cfg.profile = ProfileKind::Cosine;
        cfg.amplitude = vec![0.1, -0.1];
        let cosine = cfg.initial_field().unwrap();
        let x0 = cfg.grid().unwrap().center(0);
        let expected = 0.5 + 0.1 * (PI * x0).cos();
        assert!((cosine.cell(0)[0] - expected).abs() <= 1e-12);

        cfg.profile = ProfileKind::RandomSmooth;
        cfg.amplitude = vec![0.05, 0.05];
        cfg.seed = 7;
        let smooth = cfg.initial_field().unwrap();
        assert!(smooth.max_sum_deviation() <= 1e-12);
        let again = cfg.initial_field().unwrap();
        assert_eq!(smooth.data(), again.data());
        cfg.seed = 8;
        let different = cfg.initial_field().unwrap();
        assert_ne!(smooth.data(), different.data());
    }

    #[test]
    fn solver_config_assembly() {
        let cfg = parse_config(MINIMAL).unwrap();
        let sc = cfg.solver_config().unwrap();
        assert_eq!(sc.t_end, 0.1);
        assert_eq!(sc.safety, 0.4);
        assert!(sc.d.is_some());
    }
}
