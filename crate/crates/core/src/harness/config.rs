//! Experiment configuration files.
//!
//! ```toml
//! problem = "heat"
//! [physics]
//! kappa = 1.0
//! [mesh]
//! resolutions = [32, 64]
//! barycentric = true
//! [time]
//! dt = [0.001]
//! t_final = 0.3
//! [cda]
//! mu = [inf]
//! coarse_width = [0.1111111111111111]
//! [output]
//! dir = "out/heat"
//! ```
//!
//! Every list is a sweep axis; a run is one point of their product.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drivers::step_count;
use crate::error::{Error, Result};
use crate::observation::NudgingMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Heat,
    Transport,
    Nse,
    PoissonProj,
    StokesProj,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub cda: CdaConfig,
    #[serde(default)]
    pub truth: TruthConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub kappa: Option<f64>,
    pub nu: Option<f64>,
    /// Shear-layer Reynolds number, an alternative to `nu` for `nse`.
    pub reynolds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Cells per unit length, `1/h`.
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub barycentric: bool,
    /// `[nx, ny]` cells along and across the transport channel.
    #[serde(default = "default_channel")]
    pub channel: [usize; 2],
}

fn default_resolutions() -> Vec<usize> {
    vec![16]
}

fn default_channel() -> [usize; 2] {
    [96, 16]
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            resolutions: default_resolutions(),
            barycentric: false,
            channel: default_channel(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default = "default_degree")]
    pub degree: usize,
}

fn default_degree() -> usize {
    2
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig { degree: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_dt")]
    pub dt: Vec<f64>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
}

fn default_dt() -> Vec<f64> {
    vec![0.01]
}

fn default_t_final() -> f64 {
    1.0
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            dt: default_dt(),
            t_final: default_t_final(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdaConfig {
    /// Nudging parameters; `inf` selects direct enforcement and `0` a free run.
    #[serde(default = "default_mu", with = "mu_list")]
    pub mu: Vec<f64>,
    /// Form used for finite `mu`.
    #[serde(default = "default_mode")]
    pub mode: NudgingMode,
    /// Coarse widths `H`; each must tile the unit square.
    #[serde(default = "default_coarse")]
    pub coarse_width: Vec<f64>,
    /// Coarse lattice `[nx, ny]` over the channel's bounding box.
    #[serde(default = "default_counts")]
    pub coarse_counts: [usize; 2],
}

fn default_mu() -> Vec<f64> {
    vec![f64::INFINITY]
}

fn default_mode() -> NudgingMode {
    NudgingMode::Galerkin
}

fn default_coarse() -> Vec<f64> {
    vec![0.25]
}

fn default_counts() -> [usize; 2] {
    [12, 8]
}

impl Default for CdaConfig {
    fn default() -> Self {
        CdaConfig {
            mu: default_mu(),
            mode: default_mode(),
            coarse_width: default_coarse(),
            coarse_counts: default_counts(),
        }
    }
}

impl CdaConfig {
    /// Mode actually used for a given `mu`.
    pub fn mode_for(&self, mu: f64) -> NudgingMode {
        if mu.is_infinite() {
            NudgingMode::Direct
        } else {
            self.mode
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    /// Trajectory file for the reference run; read if it exists, otherwise
    /// written after computing the reference.
    pub snapshot: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("cda-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

/// `inf` is kept as the string `"inf"` so the list survives JSON.
mod mu_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Mu {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(mus: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Mu> = mus
            .iter()
            .map(|&m| if m.is_finite() { Mu::Number(m) } else { Mu::Text(crate::harness::run::mu_label(m)) })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Mu>::deserialize(d)?
            .into_iter()
            .map(|m| match m {
                Mu::Number(x) => Ok(x),
                Mu::Text(t) => crate::harness::run::parse_mu(&t).map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        if let Some(s) = cfg.truth.snapshot.as_mut().filter(|s| s.is_relative()) {
            *s = base.join(&*s);
        }
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            serde_json::to_value(self.problem)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        })
    }

    pub fn is_projection(&self) -> bool {
        matches!(self.problem, ProblemKind::PoissonProj | ProblemKind::StokesProj)
    }

    /// `κ` for scalar problems, `ν` for flow problems.
    pub fn coefficient(&self) -> Result<f64> {
        let p = &self.physics;
        match self.problem {
            ProblemKind::Heat | ProblemKind::Transport | ProblemKind::PoissonProj => {
                p.kappa.ok_or_else(|| field("physics.kappa", "required for this problem"))
            }
            ProblemKind::StokesProj => p.nu.ok_or_else(|| field("physics.nu", "required for this problem")),
            ProblemKind::Nse => match (p.nu, p.reynolds) {
                (Some(nu), None) => Ok(nu),
                (None, Some(re)) => Ok(crate::drivers::nse::kh_viscosity(re)),
                _ => Err(field("physics", "give exactly one of nu and reynolds")),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.coefficient()?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(field("physics", format!("diffusion coefficient must be positive, got {c}")));
        }
        if !(1..=2).contains(&self.space.degree) {
            return Err(field("space.degree", "must be 1 or 2"));
        }
        if matches!(self.problem, ProblemKind::Nse | ProblemKind::StokesProj) && self.space.degree != 2 {
            return Err(field("space.degree", "flow problems use P2/P1 Taylor-Hood"));
        }
        if self.mesh.resolutions.is_empty() || self.mesh.resolutions.contains(&0) {
            return Err(field("mesh.resolutions", "need at least one positive entry"));
        }
        if self.mesh.channel.contains(&0) {
            return Err(field("mesh.channel", "cell counts must be positive"));
        }
        if !self.is_projection() {
            if self.time.dt.is_empty() {
                return Err(field("time.dt", "need at least one time step"));
            }
            for &dt in &self.time.dt {
                step_count(self.time.t_final, dt).map_err(|e| field("time", e))?;
            }
        }
        if self.cda.mu.is_empty() {
            return Err(field("cda.mu", "need at least one value"));
        }
        for &mu in &self.cda.mu {
            if !(mu >= 0.0) {
                return Err(field("cda.mu", format!("must be non-negative or inf, got {mu}")));
            }
            if mu.is_infinite() && self.is_projection() {
                return Err(field("cda.mu", "projections take finite mu only"));
            }
        }
        if self.cda.mode == NudgingMode::Direct {
            return Err(field("cda.mode", "direct enforcement is selected by mu = inf"));
        }
        if self.problem != ProblemKind::Transport {
            if self.cda.coarse_width.is_empty() {
                return Err(field("cda.coarse_width", "need at least one value"));
            }
            for &h in &self.cda.coarse_width {
                let cells = 1.0 / h;
                if !(h > 0.0 && h <= 1.0) || (cells - cells.round()).abs() > 1e-9 * cells {
                    return Err(field(
                        "cda.coarse_width",
                        format!("H = {h} must divide the unit square's side (1/H an integer)"),
                    ));
                }
            }
        } else if self.cda.coarse_counts.contains(&0) {
            return Err(field("cda.coarse_counts", "lattice counts must be positive"));
        }
        if self.truth.snapshot.is_some() && !matches!(self.problem, ProblemKind::Transport | ProblemKind::Nse) {
            return Err(field("truth.snapshot", "only transport and nse use a reference trajectory"));
        }
        if self.truth.snapshot.is_some() && self.time.dt.len() > 1 {
            return Err(field("truth.snapshot", "a stored trajectory has a single time step"));
        }
        Ok(())
    }
}
