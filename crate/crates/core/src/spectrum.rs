//! Model definition: operator spectrum λₖ, noise spectrum ηₖ, noise
//! coefficients (α₁, α₂), per-mode initial data and the spectral truncation M.
//!
//! The (possibly infinite) spectrum is represented by its first `stored`
//! entries. Only the first `M` modes are simulated, but the exact LIL constant
//! takes the supremum of ηₖ over every stored mode.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

/// Default cap on Σηₖ over the stored modes.
pub const DEFAULT_TRACE_CAP: f64 = 1.0e6;

/// Noise coefficients (α₁, α₂) multiplying dW in the X and Y equations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Alpha {
    pub a1: f64,
    pub a2: f64,
}

impl Alpha {
    pub fn new(a1: f64, a2: f64) -> Self {
        Self { a1, a2 }
    }

    /// √(α₁² + α₂²)
    pub fn norm(&self) -> f64 {
        self.a1.hypot(self.a2)
    }
}

/// Validation limits applied when a [`ModelSpec`] is built.
#[derive(Debug, Clone, Copy)]
pub struct ModelLimits {
    pub trace_cap: f64,
}

impl Default for ModelLimits {
    fn default() -> Self {
        Self {
            trace_cap: DEFAULT_TRACE_CAP,
        }
    }
}

/// Immutable model description shared by every downstream module.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    lambda: Vec<f64>,
    eta: Vec<f64>,
    alpha: Alpha,
    x0: Vec<f64>,
    y0: Vec<f64>,
    m: usize,
    trace_q: f64,
}

impl ModelSpec {
    /// Builds and validates a model with the default limits.
    pub fn new(
        lambda: Vec<f64>,
        eta: Vec<f64>,
        alpha: Alpha,
        x0: Vec<f64>,
        y0: Vec<f64>,
        m: usize,
    ) -> Result<Self> {
        Self::with_limits(lambda, eta, alpha, x0, y0, m, ModelLimits::default())
    }

    pub fn with_limits(
        lambda: Vec<f64>,
        eta: Vec<f64>,
        alpha: Alpha,
        x0: Vec<f64>,
        y0: Vec<f64>,
        m: usize,
        limits: ModelLimits,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidModel("truncation M must be positive".into()));
        }
        for (name, len) in [
            ("lambda", lambda.len()),
            ("eta", eta.len()),
            ("x0", x0.len()),
            ("y0", y0.len()),
        ] {
            if len < m {
                return Err(Error::InvalidModel(format!(
                    "M = {m} exceeds the length of `{name}` ({len})"
                )));
            }
        }
        if !alpha.a1.is_finite() || !alpha.a2.is_finite() {
            return Err(Error::InvalidModel("alpha must be finite".into()));
        }
        for (k, &l) in lambda.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "lambda[{k}] = {l} is not a positive finite number"
                )));
            }
        }
        if let Some(k) = lambda.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidModel(format!(
                "lambda must be non-decreasing (lambda[{}] < lambda[{k}])",
                k + 1
            )));
        }
        for (k, &e) in eta.iter().enumerate() {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "eta[{k}] = {e} is not a non-negative finite number"
                )));
            }
        }
        if x0.iter().chain(&y0).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("initial data must be finite".into()));
        }
        let trace_q: f64 = eta.iter().sum();
        if trace_q > limits.trace_cap {
            return Err(Error::InvalidModel(format!(
                "trace of Q over stored modes ({trace_q}) exceeds the cap {}; the noise spectrum looks divergent",
                limits.trace_cap
            )));
        }
        Ok(Self {
            lambda,
            eta,
            alpha,
            x0,
            y0,
            m,
            trace_q,
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    /// Spectral truncation dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of stored modes (≥ M).
    pub fn stored(&self) -> usize {
        self.eta.len()
    }

    /// Σηₖ over the stored modes.
    pub fn trace_q(&self) -> f64 {
        self.trace_q
    }

    /// Largest stored noise eigenvalue.
    pub fn max_eta(&self) -> f64 {
        self.eta.iter().copied().fold(0.0, f64::max)
    }

    /// Same model restricted to the first `m` modes for simulation; the
    /// stored spectrum is kept.
    pub fn with_truncation(&self, m: usize) -> Result<Self> {
        Self::new(
            self.lambda.clone(),
            self.eta.clone(),
            self.alpha,
            self.x0.clone(),
            self.y0.clone(),
            m,
        )
    }

    /// Same spectra with different noise coefficients.
    pub fn with_alpha(&self, alpha: Alpha) -> Result<Self> {
        Self::new(
            self.lambda.clone(),
            self.eta.clone(),
            alpha,
            self.x0.clone(),
            self.y0.clone(),
            self.m,
        )
    }

    /// Same model with the given initial data replicated over all stored modes.
    pub fn with_initial(&self, x0: f64, y0: f64) -> Result<Self> {
        let n = self.stored();
        Self::new(
            self.lambda.clone(),
            self.eta.clone(),
            self.alpha,
            vec![x0; n],
            vec![y0; n],
            self.m,
        )
    }
}

/// The a.s. limit of ‖X(t)‖/√(t log log t) (and of ‖Y‖ and the joint norm) for
/// the exact solution: √(α₁²+α₂²) · √(max ηₖ).
pub fn exact_lil_constant(model: &ModelSpec) -> f64 {
    model.alpha().norm() * model.max_eta().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Oscillator,
    Schrodinger,
}

impl std::str::FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oscillator" => Ok(Self::Oscillator),
            "schrodinger" | "schroedinger" => Ok(Self::Schrodinger),
            other => Err(Error::InvalidModel(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub kind: PresetKind,
    pub params: BTreeMap<String, f64>,
}

impl Preset {
    pub fn new(kind: PresetKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn known_keys(&self) -> &'static [&'static str] {
        match self.kind {
            PresetKind::Oscillator => &["alpha", "x0", "y0"],
            PresetKind::Schrodinger => &["alpha", "M", "store", "p", "eta_scale", "x0", "y0"],
        }
    }
}

fn count_param(name: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidModel(format!(
            "parameter `{name}` must be a positive integer, got {v}"
        )))
    }
}

/// Builds a model from a preset; `overrides` win over the preset's own
/// parameter map.
///
/// * oscillator: M = 1, λ₁ = 1, η₁ = 1, α = (0, alpha) with alpha > 0.
/// * schrodinger: λₖ = k², ηₖ = eta_scale·k^(−p), α = (0, alpha).
pub fn build_model(preset: &Preset, overrides: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let known = preset.known_keys();
    let mut params = preset.params.clone();
    for (k, v) in overrides {
        params.insert(k.clone(), *v);
    }
    if let Some(bad) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::UnknownParameter(bad.clone()));
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);

    let alpha = get("alpha", 1.0);
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidModel(format!(
            "preset noise amplitude alpha must be positive, got {alpha}"
        )));
    }
    let (x0, y0) = (get("x0", 0.0), get("y0", 0.0));
    match preset.kind {
        PresetKind::Oscillator => ModelSpec::new(
            vec![1.0],
            vec![1.0],
            Alpha::new(0.0, alpha),
            vec![x0],
            vec![y0],
            1,
        ),
        PresetKind::Schrodinger => {
            let m = count_param("M", get("M", 8.0))?;
            let stored = count_param("store", get("store", m as f64))?.max(m);
            let p = get("p", 2.0);
            let scale = get("eta_scale", 1.0);
            let lambda = (1..=stored).map(|k| (k * k) as f64).collect();
            let eta = (1..=stored).map(|k| scale * (k as f64).powf(-p)).collect();
            ModelSpec::new(
                lambda,
                eta,
                Alpha::new(0.0, alpha),
                vec![x0; stored],
                vec![y0; stored],
                m,
            )
        }
    }
}

/// A sequence given either literally or through a generator rule.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeqField {
    Values(Vec<f64>),
    Rule(RuleSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub rule: String,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub value: Option<f64>,
}

impl SeqField {
    /// Materializes the first `n` entries (k = 1..=n for rules).
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            SeqField::Values(v) => Ok(v.clone()),
            SeqField::Rule(r) => {
                let scale = r.scale.unwrap_or(1.0);
                let gen: Box<dyn Fn(f64) -> f64> = match r.rule.replace(' ', "").as_str() {
                    "k^2" => Box::new(move |k| scale * k * k),
                    "k" => Box::new(move |k| scale * k),
                    "k^-p" => {
                        let p = r.p.ok_or_else(|| {
                            Error::InvalidModel("rule `k^-p` needs a `p` field".into())
                        })?;
                        Box::new(move |k: f64| scale * k.powf(-p))
                    }
                    "const" => {
                        let v = r.value.ok_or_else(|| {
                            Error::InvalidModel("rule `const` needs a `value` field".into())
                        })?;
                        Box::new(move |_| v)
                    }
                    other => {
                        return Err(Error::InvalidModel(format!(
                            "unknown sequence rule `{other}`"
                        )))
                    }
                };
                Ok((1..=n).map(|k| gen(k as f64)).collect())
            }
        }
    }
}

/// On-disk model document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    /// Number of stored modes when sequences are generated by rules.
    #[serde(default)]
    pub store: Option<usize>,
    #[serde(default)]
    pub alpha: Option<[f64; 2]>,
    #[serde(default)]
    pub lambda: Option<SeqField>,
    #[serde(default)]
    pub eta: Option<SeqField>,
    #[serde(default)]
    pub x0: Option<SeqField>,
    #[serde(default)]
    pub y0: Option<SeqField>,
    #[serde(default)]
    pub trace_cap: Option<f64>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn into_model(self) -> Result<ModelSpec> {
        let limits = ModelLimits {
            trace_cap: self.trace_cap.unwrap_or(DEFAULT_TRACE_CAP),
        };
        let preset = self
            .preset
            .as_deref()
            .map(str::parse::<PresetKind>)
            .transpose()?;
        if let Some([a1, a2]) = self.alpha {
            if preset.is_some() && a1 != 0.0 {
                return Err(Error::InvalidModel(
                    "presets fix alpha1 = 0; got a non-zero first component".into(),
                ));
            }
            if preset.is_some() && !(a2 > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "preset noise amplitude alpha must be positive, got {a2}"
                )));
            }
        }

        match preset {
            Some(PresetKind::Oscillator) => {
                if self.lambda.is_some() || self.eta.is_some() {
                    return Err(Error::InvalidModel(
                        "the oscillator preset fixes lambda and eta".into(),
                    ));
                }
                if self.m.is_some_and(|m| m != 1) {
                    return Err(Error::InvalidModel(
                        "the oscillator preset has M = 1".into(),
                    ));
                }
                let mut over = BTreeMap::new();
                if let Some([_, a2]) = self.alpha {
                    over.insert("alpha".to_string(), a2);
                }
                for (key, field) in [("x0", &self.x0), ("y0", &self.y0)] {
                    if let Some(f) = field {
                        let v = f.materialize(1)?;
                        let first = *v
                            .first()
                            .ok_or_else(|| Error::InvalidModel(format!("`{key}` is empty")))?;
                        over.insert(key.to_string(), first);
                    }
                }
                build_model(&Preset::new(PresetKind::Oscillator), &over)
            }
            Some(PresetKind::Schrodinger) | None => {
                let m = self
                    .m
                    .ok_or_else(|| Error::InvalidModel("missing `M`".into()))?;
                let stored = self.store.unwrap_or(m).max(m);
                let lambda = match (&self.lambda, preset) {
                    (Some(f), _) => f.materialize(stored)?,
                    (None, Some(PresetKind::Schrodinger)) => {
                        (1..=stored).map(|k| (k * k) as f64).collect()
                    }
                    (None, _) => return Err(Error::InvalidModel("missing `lambda`".into())),
                };
                if preset == Some(PresetKind::Schrodinger)
                    && lambda
                        .iter()
                        .enumerate()
                        .any(|(i, &l)| l != ((i + 1) * (i + 1)) as f64)
                {
                    return Err(Error::InvalidModel(
                        "the schrodinger preset requires lambda_k = k^2".into(),
                    ));
                }
                let eta = self
                    .eta
                    .as_ref()
                    .ok_or_else(|| Error::InvalidModel("missing `eta`".into()))?
                    .materialize(stored)?;
                let alpha = match (self.alpha, preset) {
                    (Some([a1, a2]), _) => Alpha::new(a1, a2),
                    (None, Some(_)) => Alpha::new(0.0, 1.0),
                    (None, None) => return Err(Error::InvalidModel("missing `alpha`".into())),
                };
                for (name, len) in [("lambda", lambda.len()), ("eta", eta.len())] {
                    if len < stored {
                        return Err(Error::InvalidModel(format!(
                            "`{name}` has {len} entries but {stored} modes are stored"
                        )));
                    }
                }
                let n = lambda.len().min(eta.len());
                let init = |f: &Option<SeqField>| -> Result<Vec<f64>> {
                    match f {
                        Some(f) => f.materialize(n),
                        None => Ok(vec![0.0; n]),
                    }
                };
                let x0 = init(&self.x0)?;
                let y0 = init(&self.y0)?;
                ModelSpec::with_limits(lambda, eta, alpha, x0, y0, m, limits)
            }
        }
    }
}

/// Reads a JSON model document from disk.
pub fn load_model(path: &Path) -> Result<ModelSpec> {
    ModelFile::read(path)?.into_model()
}
