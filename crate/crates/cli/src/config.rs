use crate::error::{CliError, CliResult};
use bst_core::{make_grid, FrequencyGrid, StateConfig, TofsConfig};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// nm
    pub center: f64,
    /// nm
    pub span: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            center: 1550.0,
            span: 36.0,
            n: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomConfig {
    /// ps, `[min, max]`.
    pub delay_range: [f64; 2],
    pub points: usize,
    /// rad; curves written by `hom`.
    pub phis: Vec<f64>,
    /// Counts at the highest point of a simulated interferogram.
    pub peak_counts: f64,
    /// Candidate phases for `infer`; defaults to `phis`.
    pub candidates: Option<Vec<f64>>,
    /// Acceptance half-width of the measured phase, in standard errors.
    pub k_sigma: f64,
}

impl Default for HomConfig {
    fn default() -> Self {
        Self {
            delay_range: [-8.0, 8.0],
            points: 100,
            phis: vec![0.0, PI / 2.0, PI, 1.5 * PI],
            peak_counts: 1000.0,
            candidates: None,
            k_sigma: bst_core::phase::DEFAULT_PHASE_K_SIGMA,
        }
    }
}

impl HomConfig {
    pub fn delays(&self) -> Vec<f64> {
        let [a, b] = self.delay_range;
        let n = self.points;
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub rounds: usize,
    /// Seeds every random stage of the pipeline.
    pub seed: u64,
    /// Intensity maps that are not counts are scaled to this total.
    pub total_counts: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            rounds: 1000,
            seed: 1,
            total_counts: 1.3e7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tofs: TofsConfig,
    #[serde(default)]
    pub hom: HomConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            state: StateConfig::default(),
            grid: GridConfig::default(),
            tofs: TofsConfig::default(),
            hom: HomConfig::default(),
            mc: McConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

/// A validation failure naming a dotted field path.
struct FieldError {
    field: String,
    message: String,
}

fn field(field: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.to_string(),
        message: message.into(),
    }
}

impl PipelineConfig {
    pub fn grid(&self) -> CliResult<FrequencyGrid> {
        make_grid(self.grid.center, self.grid.span, self.grid.n).map_err(CliError::numeric)
    }

    fn check(&self) -> Result<(), FieldError> {
        let g = &self.grid;
        if !(g.span > 0.0) || !g.span.is_finite() {
            return Err(field(
                "grid.span",
                format!("must be positive (got {})", g.span),
            ));
        }
        if !(g.center > g.span / 2.0) || !g.center.is_finite() {
            return Err(field(
                "grid.center",
                format!("must exceed span/2 (got {})", g.center),
            ));
        }
        if g.n < 2 {
            return Err(field("grid.n", format!("must be at least 2 (got {})", g.n)));
        }
        self.state.validate().map_err(|e| match e {
            bst_core::SpectralError::InvalidParameter { field: f, .. } => {
                let path = if f.starts_with("state.") {
                    f.to_string()
                } else {
                    format!("state.{f}")
                };
                field(&path, e.to_string())
            }
            other => field("state", other.to_string()),
        })?;
        self.tofs.validate().map_err(|e| match e {
            bst_core::TofsError::InvalidConfig { field: f, .. } => field(f, e.to_string()),
            other => field("tofs", other.to_string()),
        })?;
        let h = &self.hom;
        let [a, b] = h.delay_range;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(field(
                "hom.delay_range",
                format!("must be an increasing pair (got [{a}, {b}])"),
            ));
        }
        if h.points < 10 {
            return Err(field(
                "hom.points",
                format!("must be at least 10 (got {})", h.points),
            ));
        }
        if h.phis.is_empty() || h.phis.iter().any(|p| !p.is_finite()) {
            return Err(field(
                "hom.phis",
                "must be a non-empty list of finite phases",
            ));
        }
        if let Some(c) = &h.candidates {
            if c.len() < 2 || c.iter().any(|p| !p.is_finite()) {
                return Err(field(
                    "hom.candidates",
                    "must list at least two finite phases",
                ));
            }
        }
        if !(h.peak_counts > 0.0) || !h.peak_counts.is_finite() {
            return Err(field(
                "hom.peak_counts",
                format!("must be positive (got {})", h.peak_counts),
            ));
        }
        if !(h.k_sigma > 0.0) || !h.k_sigma.is_finite() {
            return Err(field(
                "hom.k_sigma",
                format!("must be positive (got {})", h.k_sigma),
            ));
        }
        if self.mc.rounds < 2 {
            return Err(field(
                "mc.rounds",
                format!("must be at least 2 (got {})", self.mc.rounds),
            ));
        }
        if !(self.mc.total_counts >= 1.0) || !self.mc.total_counts.is_finite() {
            return Err(field(
                "mc.total_counts",
                format!("must be at least 1 (got {})", self.mc.total_counts),
            ));
        }
        Ok(())
    }

    /// Validates a config that did not come from a file.
    pub fn validate(&self) -> CliResult<()> {
        self.check()
            .map_err(|e| CliError::Config(format!("{}: {}", e.field, e.message)))
    }

    pub fn candidates(&self) -> Vec<f64> {
        self.hom
            .candidates
            .clone()
            .unwrap_or_else(|| self.hom.phis.clone())
    }
}

/// Line of the key for dotted `path` in `text`, following the nesting of
/// the path's segments. `None` when the field was left at its default.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut from = 0;
    for seg in path.split('.') {
        let key = format!("\"{seg}\"");
        from += text[from..].find(&key)?;
    }
    Some(text[..from].matches('\n').count() + 1)
}

pub fn parse_config(text: &str, origin: &str) -> CliResult<PipelineConfig> {
    let cfg: PipelineConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    cfg.check().map_err(|e| {
        let line = locate(text, &e.field)
            .or_else(|| {
                // fields reported without their section, e.g. `pump.*`
                let nested = format!("state.{}", e.field);
                locate(text, &nested)
            })
            .map_or_else(|| "(default)".to_string(), |l| l.to_string());
        CliError::Config(format!("{origin}:{line}: {}: {}", e.field, e.message))
    })?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        None => {
            let cfg = PipelineConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_config(&text, &p.display().to_string())
        }
    }
}

/// Parses `0,pi/2,pi,3pi/2`-style phase lists.
pub fn parse_phase_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| parse_phase(t.trim())).collect()
}

fn parse_phase(t: &str) -> Result<f64, String> {
    let bad = || format!("invalid phase {t:?}");
    let lower = t.to_ascii_lowercase();
    let (num, den) = match lower.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (lower.as_str(), 1.0),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.trim().trim_end_matches('*');
        let c = match coef {
            "" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        c * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let v = value / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}
