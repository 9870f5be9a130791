use serde::{Deserialize, Serialize};

use rescaled_pressure::flow_core::step_count;
use rescaled_pressure::systems::{benchmark, CATALOG_NAMES};
use rescaled_pressure::{BallVariant, PotentialSpec, SystemSpec, WarpBand};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    /// Frequencies of `linear-torus`.
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Constant {
        c: f64,
    },
    CoordinateSine {
        #[serde(default)]
        axis: usize,
        #[serde(default)]
        offset: f64,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
        mass: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl PotentialConfig {
    pub fn build(&self) -> PotentialSpec<f64> {
        match self {
            PotentialConfig::Constant { c } => PotentialSpec::constant(*c),
            PotentialConfig::CoordinateSine { axis, offset } => {
                with_offset(PotentialSpec::coordinate_sine(*axis), *offset)
            }
            PotentialConfig::Bump {
                center,
                radius,
                mass,
                offset,
            } => with_offset(PotentialSpec::bump(center, *radius, *mass), *offset),
        }
    }
}

fn with_offset(f: PotentialSpec<f64>, c: f64) -> PotentialSpec<f64> {
    if c == 0.0 {
        f
    } else {
        f.shifted(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureSource {
    Uniform,
    Orbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureConfig {
    pub source: MeasureSource,
    pub atoms: usize,
    /// Orbit start; drawn from the measure seed when absent.
    pub x0: Option<Vec<f64>>,
    pub burn_in: f64,
    /// Sampling step of orbit measures; defaults to `dt`. A step commensurate
    /// with the flow's periods samples a measure that is only invariant for
    /// the time-`dt` map.
    pub dt: Option<f64>,
    /// Keep every `thin`-th orbit sample.
    pub thin: usize,
    /// Uniform atoms closer than this to the singular set are rejected.
    pub min_sing: f64,
    /// Atoms used for covering in `verify-katok`; 0 keeps all.
    pub cover_atoms: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            source: MeasureSource::Uniform,
            atoms: 2000,
            x0: None,
            burn_in: 10.0,
            dt: None,
            thin: 1,
            min_sing: 0.0,
            cover_atoms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    /// Boxes per axis; a single entry is repeated over all axes.
    pub boxes_per_side: Vec<usize>,
    pub tau: f64,
    pub n: usize,
    pub probes: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            boxes_per_side: vec![4],
            tau: 1.0,
            n: 12,
            probes: 2000,
        }
    }
}

impl PartitionConfig {
    pub fn cells(&self, dim: usize) -> Vec<usize> {
        if self.boxes_per_side.len() == 1 {
            vec![self.boxes_per_side[0]; dim]
        } else {
            self.boxes_per_side.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompactSource {
    Lattice,
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompactConfig {
    pub source: CompactSource,
    /// Lattice resolution per axis.
    pub per_side: usize,
    /// One `K` per entry, each subsampled to that many points; empty means
    /// a single `K` of `max_points`.
    pub sizes: Vec<usize>,
}

impl Default for CompactConfig {
    fn default() -> Self {
        CompactConfig {
            source: CompactSource::Lattice,
            per_side: 24,
            sizes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InclusionConfig {
    pub pairs: usize,
    /// Perturbation radius of the second point.
    pub scale: f64,
    /// Defaults to the last entry of `t_grid`.
    pub t: Option<f64>,
    /// Defaults to the first entry of `eps_grid`.
    pub eps: Option<f64>,
}

impl Default for InclusionConfig {
    fn default() -> Self {
        InclusionConfig {
            pairs: 200,
            scale: 0.01,
            t: None,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaConfig {
    pub variant: BallVariant,
    pub centers: usize,
    /// Defaults to the first entry of `eps_grid`.
    pub eps: Option<f64>,
    /// Defaults to `t_grid`.
    pub t_values: Option<Vec<f64>>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            variant: BallVariant::R2,
            centers: 50,
            eps: None,
            t_values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombinatoricsConfig {
    pub alphabets: Vec<usize>,
    pub max_n: usize,
    pub radii: Vec<f64>,
    pub rate_n: usize,
    pub rate_radii: Vec<f64>,
}

impl Default for CombinatoricsConfig {
    fn default() -> Self {
        CombinatoricsConfig {
            alphabets: vec![3, 4],
            max_n: 8,
            radii: vec![0.0, 0.25, 0.5, 0.9],
            rate_n: 4000,
            rate_radii: vec![0.1, 0.25],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub measure: u64,
    pub pairs: u64,
    pub gamma: u64,
    pub lipschitz: u64,
}

fn default_variants() -> Vec<BallVariant> {
    vec![BallVariant::R1]
}

fn default_deltas() -> Vec<f64> {
    vec![0.1]
}

fn default_pool_size() -> usize {
    rescaled_pressure::pressure_metric::DEFAULT_POOL_SIZE
}

fn default_lambda() -> f64 {
    0.5
}

fn default_rho_sing() -> f64 {
    0.05
}

fn default_max_points() -> usize {
    40
}

/// One experiment. Fields unused by a command may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default = "default_variants")]
    pub variants: Vec<BallVariant>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub compact: CompactConfig,
    #[serde(default)]
    pub inclusion: InclusionConfig,
    #[serde(default)]
    pub gamma: GammaConfig,
    #[serde(default)]
    pub combinatorics: CombinatoricsConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Band floor; defaults to `10 dt`.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default = "default_rho_sing")]
    pub rho_sing: f64,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

/// Which parts of the configuration a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    pub system: bool,
    pub grids: bool,
}

/// A parsed configuration with the source text kept for error anchoring.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
}

/// Resolved objects for commands that simulate a system.
pub struct Setup {
    pub sys: SystemSpec<f64>,
    pub f: PotentialSpec<f64>,
    pub t_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub dt: f64,
    pub band: WarpBand<f64>,
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("config:{}:{}: {e}", e.line(), e.column())))?;
        Ok(LoadedConfig {
            config,
            text: text.to_string(),
        })
    }

    /// Line of the first occurrence of `"key"`, or 1.
    pub fn line_of(&self, key: &str) -> usize {
        let quoted = format!("\"{key}\"");
        self.text.lines().position(|l| l.contains(&quoted)).map_or(1, |i| i + 1)
    }

    pub fn invalid(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Validation(format!("config:{}: {key}: {msg}", self.line_of(key)))
    }

    fn check_grid(&self, key: &str, g: &[f64]) -> Result<(), CliError> {
        if g.is_empty() {
            return Err(self.invalid(key, "must not be empty"));
        }
        if g.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(self.invalid(key, "entries must be positive and finite"));
        }
        if g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(self.invalid(key, "must be strictly increasing"));
        }
        Ok(())
    }

    fn check_positive(&self, key: &str, v: f64) -> Result<(), CliError> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.invalid(key, format!("must be positive, got {v}")));
        }
        Ok(())
    }

    /// Checks everything `needs` asks for and builds the shared objects.
    pub fn setup(&self, needs: Needs) -> Result<Option<Setup>, CliError> {
        let c = &self.config;
        self.check_positive("rho_sing", c.rho_sing)?;
        if c.max_points == 0 {
            return Err(self.invalid("max_points", "must be positive"));
        }
        if c.pool_size == 0 {
            return Err(self.invalid("pool_size", "must be positive"));
        }
        if !needs.system {
            return Ok(None);
        }
        let sc = c
            .system
            .as_ref()
            .ok_or_else(|| self.invalid("system", "required by this command"))?;
        if !CATALOG_NAMES.contains(&sc.name.as_str()) {
            return Err(self.invalid(
                "system",
                format!("unknown system '{}', expected one of {CATALOG_NAMES:?}", sc.name),
            ));
        }
        if sc.omega.is_some() && sc.name != "linear-torus" {
            return Err(self.invalid("omega", "only linear-torus takes frequencies"));
        }
        let sys = benchmark::<f64>(&sc.name, sc.omega.as_deref())
            .map_err(|e| self.invalid("system", e))?
            .system;
        let f = c
            .potential
            .as_ref()
            .ok_or_else(|| self.invalid("potential", "required by this command"))?
            .build();
        f.validate(&sys).map_err(|e| self.invalid("potential", e))?;
        let dt = c.dt.ok_or_else(|| self.invalid("dt", "required by this command"))?;
        self.check_positive("dt", dt)?;
        if let Some(l) = sys.lipschitz_hint {
            if dt * l >= 0.1 {
                return Err(self.invalid("dt", format!("dt * L must stay below 0.1 (L = {l})")));
            }
        }
        let t_grid = c.t_grid.clone().unwrap_or_default();
        let eps_grid = c.eps_grid.clone().unwrap_or_default();
        if needs.grids {
            if c.t_grid.is_none() {
                return Err(self.invalid("t_grid", "required by this command"));
            }
            if c.eps_grid.is_none() {
                return Err(self.invalid("eps_grid", "required by this command"));
            }
            self.check_grid("t_grid", &t_grid)?;
            self.check_grid("eps_grid", &eps_grid)?;
            self.check_grid("deltas", &c.deltas)?;
            if c.deltas.iter().any(|&d| d >= 1.0) {
                return Err(self.invalid("deltas", "entries must lie in (0, 1)"));
            }
            for &t in &t_grid {
                if (t - (t / dt).round() * dt).abs() > 1e-9 || step_count(t, dt).is_err() {
                    return Err(self.invalid("t_grid", format!("dt = {dt} does not divide t = {t}")));
                }
            }
            if c.variants.is_empty() {
                return Err(self.invalid("variants", "must not be empty"));
            }
        }
        let b = c.b.unwrap_or(10.0 * dt);
        let band = WarpBand::new(c.lambda, b).map_err(|e| {
            let key = if c.lambda > 0.0 && c.lambda < 1.0 {
                "b"
            } else {
                "lambda"
            };
            self.invalid(key, e)
        })?;
        Ok(Some(Setup {
            sys,
            f,
            t_grid,
            eps_grid,
            dt,
            band,
        }))
    }
}
