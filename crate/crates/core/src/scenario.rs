//! Scenario configuration: TOML schema, validation, and assembly of the
//! in-memory experiment description (array, zones, source, solver and
//! evaluation settings) that the commands operate on.
//!
//! Unknown keys are rejected and parse errors carry TOML line/column
//! positions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{
    build_circular_array, build_control_layout, build_eval_grid, build_rectangular_array,
    ControlLayout, EvalGrid, LayoutStyle, Loudspeaker, Medium, Point2, VirtualSource, Zone,
    ZoneKind,
};
use crate::matrices::{QuantitySet, TransferMatrixSet};
use crate::solver::{solve_prefilter_bank, Method, PrefilterBank, SolverConfig, VelocityUnits};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub medium: Medium,
    pub geometry: GeometryConfig,
    pub source: SourceConfig,
    pub solver: SolverSection,
    pub evaluation: EvalSection,
    #[serde(default)]
    pub output: OutputSection,
    pub modal: Option<ModalSection>,
    pub snapshot: Option<SnapshotSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub array: ArrayConfig,
    pub zones: Vec<ZoneConfig>,
    /// Control-point pairs per zone for `pairs` layouts.
    #[serde(default = "default_pairs")]
    pub pairs_per_zone: usize,
    /// L-shaped groups per zone for `l_shape` layouts.
    #[serde(default = "default_l_groups")]
    pub l_groups_per_zone: usize,
}

fn default_pairs() -> usize {
    24
}
fn default_l_groups() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayConfig {
    Rectangular {
        width: f64,
        height: f64,
        count: usize,
        #[serde(default)]
        center: [f64; 2],
    },
    Circular {
        radius: f64,
        count: usize,
        #[serde(default)]
        center: [f64; 2],
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub center: [f64; 2],
    pub r_in: f64,
    pub r_out: f64,
    pub kind: ZoneKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Plane wave from `azimuth_deg`, scaled like a point source at the
    /// mean loudspeaker distance.
    PlaneWave {
        azimuth_deg: f64,
    },
    PointSource {
        position: [f64; 2],
    },
    Silence,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub methods: Vec<MethodName>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Loudspeaker weight energy ceiling; defaults to 10 / N_L.
    pub lwe_max: Option<f64>,
    #[serde(default = "default_fs")]
    pub fs: f64,
    #[serde(default = "default_filter_len")]
    pub filter_len: usize,
    #[serde(default)]
    pub velocity_units: VelocityUnits,
    /// Calibrated velocity-block balance factor; see the solver docs.
    #[serde(default = "default_velocity_scale")]
    pub velocity_scale: f64,
    #[serde(default = "default_beta_initial")]
    pub beta_initial_scale: f64,
    #[serde(default = "default_beta_growth")]
    pub beta_growth: f64,
    #[serde(default = "default_beta_ceiling")]
    pub beta_ceiling_scale: f64,
    /// Optional per-bin kappa overrides.
    #[serde(default)]
    pub kappa_override: Vec<KappaOverride>,
}

fn default_kappa() -> f64 {
    0.04
}
fn default_fs() -> f64 {
    8000.0
}
fn default_filter_len() -> usize {
    256
}
fn default_velocity_scale() -> f64 {
    crate::solver::VELOCITY_SCALE_DEFAULT
}
fn default_beta_initial() -> f64 {
    1e-8
}
fn default_beta_growth() -> f64 {
    2.0
}
fn default_beta_ceiling() -> f64 {
    1e12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaOverride {
    pub bin: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Pm,
    Jpvm,
    JpvmPlus,
    /// JPVM's L-shape layout, matching pressure and radial velocity only.
    JpvmRadialOnly,
    /// JPVM's L-shape layout, matching pressure and tangential velocity
    /// only.
    JpvmTangentialOnly,
}

impl MethodName {
    pub fn to_method(self) -> Method {
        match self {
            MethodName::Pm => Method::Pm,
            MethodName::Jpvm => Method::Jpvm,
            MethodName::JpvmPlus => Method::JpvmPlus,
            MethodName::JpvmRadialOnly => Method::Custom {
                style: LayoutStyle::LShape,
                quantities: QuantitySet::RADIAL,
            },
            MethodName::JpvmTangentialOnly => Method::Custom {
                style: LayoutStyle::LShape,
                quantities: QuantitySet::TANGENTIAL,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MethodName::Pm => "pm",
            MethodName::Jpvm => "jpvm",
            MethodName::JpvmPlus => "jpvm_plus",
            MethodName::JpvmRadialOnly => "jpvm_radial_only",
            MethodName::JpvmTangentialOnly => "jpvm_tangential_only",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_grid_spacing")]
    pub grid_spacing: f64,
    #[serde(default = "default_grid_side")]
    pub grid_side: usize,
    /// Bins below this frequency are excluded from broadband averages.
    #[serde(default = "default_f_min")]
    pub f_min: f64,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rir_len")]
    pub rir_len: usize,
    #[serde(default)]
    pub noise_scaling: NoiseScaling,
}

fn default_grid_spacing() -> f64 {
    0.02
}
fn default_grid_side() -> usize {
    21
}
fn default_f_min() -> f64 {
    100.0
}
fn default_rir_len() -> usize {
    128
}

/// How the sensor-noise variance is matched to the clean impulse-response
/// energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// Per impulse response (each response gets the configured SNR).
    #[default]
    PerResponse,
    /// One variance for all responses, from the mean clean energy.
    Global,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    #[serde(default)]
    pub prefilters: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalSection {
    pub m: Vec<i32>,
    pub radii: Vec<f64>,
    pub source_r: f64,
    pub source_phi_deg: f64,
    pub f_start: f64,
    pub f_stop: f64,
    pub f_step: f64,
    /// Angular spacing for the tangential column; defaults to the arc that
    /// matches the radial gap of the radii pair.
    pub delta_phi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    pub methods: Vec<MethodName>,
    /// Steady-state frame frequencies in Hz.
    #[serde(default)]
    pub frequencies: Vec<f64>,
    /// Sample indices for broadband pulse frames.
    #[serde(default)]
    pub times: Vec<usize>,
    /// Length of the raised-cosine pulse driving the pulse frames.
    #[serde(default = "default_pulse_len")]
    pub pulse_len: usize,
    pub raster: RasterSection,
}

fn default_pulse_len() -> usize {
    48
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterSection {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub spacing: f64,
}

/// A validated, ready-to-run experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub medium: Medium,
    pub array: Vec<Loudspeaker>,
    pub zones: Vec<Zone>,
    pub source: VirtualSource,
    pub methods: Vec<MethodName>,
    pub solver: SolverConfig,
    pub fs: f64,
    pub filter_len: usize,
    pub grid_spacing: f64,
    pub grid_side: usize,
    pub f_min: f64,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    pub rir_len: usize,
    pub noise_scaling: NoiseScaling,
    pub pairs_per_zone: usize,
    pub l_groups_per_zone: usize,
    pub output_dir: Option<String>,
    pub write_prefilters: bool,
    pub modal: Option<ModalSection>,
    pub snapshot: Option<SnapshotSection>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)?;
        Scenario::from_config(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Scenario::from_toml_str(&text)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let array = match config.geometry.array {
            ArrayConfig::Rectangular {
                width,
                height,
                count,
                center,
            } => build_rectangular_array(width, height, count, Point2::new(center[0], center[1]))?,
            ArrayConfig::Circular {
                radius,
                count,
                center,
            } => build_circular_array(radius, count, Point2::new(center[0], center[1]))?,
        };

        if config.geometry.zones.is_empty() {
            return Err(Error::config("at least one zone is required"));
        }
        let mut zones = Vec::new();
        for z in &config.geometry.zones {
            zones.push(Zone::new(
                Point2::new(z.center[0], z.center[1]),
                z.r_in,
                z.r_out,
                z.kind,
            )?);
        }
        // bright zone first; exactly one bright zone
        zones.sort_by_key(|z| match z.kind {
            ZoneKind::Bright => 0,
            ZoneKind::Dark => 1,
        });
        let bright_count = zones.iter().filter(|z| z.kind == ZoneKind::Bright).count();
        if bright_count != 1 {
            return Err(Error::config(format!(
                "exactly one bright zone is required, got {bright_count}"
            )));
        }
        for (i, a) in zones.iter().enumerate() {
            for b in zones.iter().skip(i + 1) {
                if a.center.dist(b.center) <= a.r_out + b.r_out {
                    return Err(Error::config(
                        "zones overlap: center distance must exceed the sum of outer radii",
                    ));
                }
            }
            for speaker in &array {
                if speaker.position.dist(a.center) <= a.r_out {
                    return Err(Error::config(
                        "loudspeaker lies inside a zone's outer contour",
                    ));
                }
            }
        }
        let bright_center = zones[0].center;

        let source = match config.source {
            SourceConfig::PlaneWave { azimuth_deg } => {
                VirtualSource::plane_wave_scaled(azimuth_deg.to_radians(), &array, bright_center)
            }
            SourceConfig::PointSource { position } => VirtualSource::PointSource {
                position: Point2::new(position[0], position[1]),
            },
            SourceConfig::Silence => VirtualSource::Silence,
        };

        if config.solver.methods.is_empty() {
            return Err(Error::config(
                "solver.methods must name at least one method",
            ));
        }
        let lwe_max = config.solver.lwe_max.unwrap_or(10.0 / array.len() as f64);
        let mut solver = SolverConfig::new(config.solver.kappa, lwe_max);
        solver.velocity_units = config.solver.velocity_units;
        solver.velocity_scale = config.solver.velocity_scale;
        solver.beta_initial_scale = config.solver.beta_initial_scale;
        solver.beta_growth = config.solver.beta_growth;
        solver.beta_ceiling_scale = config.solver.beta_ceiling_scale;
        solver.kappa_overrides = config
            .solver
            .kappa_override
            .iter()
            .map(|o| (o.bin, o.kappa))
            .collect::<BTreeMap<_, _>>();
        solver.validate()?;

        if config.solver.filter_len == 0 || !config.solver.filter_len.is_multiple_of(2) {
            return Err(Error::config("solver.filter_len must be even and positive"));
        }
        if config.evaluation.rir_len == 0 {
            return Err(Error::config("evaluation.rir_len must be positive"));
        }

        let scenario = Scenario {
            medium: config.medium,
            array,
            zones,
            source,
            methods: config.solver.methods,
            solver,
            fs: config.solver.fs,
            filter_len: config.solver.filter_len,
            grid_spacing: config.evaluation.grid_spacing,
            grid_side: config.evaluation.grid_side,
            f_min: config.evaluation.f_min,
            snr_db: config.evaluation.snr_db,
            seed: config.evaluation.seed,
            rir_len: config.evaluation.rir_len,
            noise_scaling: config.evaluation.noise_scaling,
            pairs_per_zone: config.geometry.pairs_per_zone,
            l_groups_per_zone: config.geometry.l_groups_per_zone,
            output_dir: config.output.dir,
            write_prefilters: config.output.prefilters,
            modal: config.modal,
            snapshot: config.snapshot,
        };
        // fail early if the evaluation grid does not fit the zones
        scenario.eval_grids()?;
        Ok(scenario)
    }

    pub fn bright_zone(&self) -> &Zone {
        &self.zones[0]
    }

    /// Control layouts for all zones in zone order, for one layout style.
    pub fn layouts(&self, style: LayoutStyle) -> Result<Vec<ControlLayout>> {
        let groups = match style {
            LayoutStyle::Pairs => self.pairs_per_zone,
            LayoutStyle::LShape => self.l_groups_per_zone,
        };
        self.zones
            .iter()
            .map(|&zone| build_control_layout(zone, style, groups))
            .collect()
    }

    /// Evaluation grid per zone, in zone order.
    pub fn eval_grids(&self) -> Result<Vec<EvalGrid>> {
        self.zones
            .iter()
            .map(|z| build_eval_grid(z, self.grid_spacing, self.grid_side))
            .collect()
    }

    /// Assembles the per-frequency system for a method from the analytic
    /// free-field model.
    pub fn transfer_set(&self, method: Method, omega: f64) -> Result<TransferMatrixSet> {
        let layouts = self.layouts(method.layout_style())?;
        TransferMatrixSet::assemble(
            &self.array,
            &layouts,
            method.quantities(),
            &self.source,
            omega,
            &self.medium,
        )
    }

    /// Designs the full prefilter bank for a method from the analytic
    /// model.
    pub fn solve_bank(&self, method: Method) -> Result<PrefilterBank> {
        solve_prefilter_bank(
            self.array.len(),
            self.fs,
            self.filter_len,
            &self.solver,
            &self.medium,
            |_, omega| self.transfer_set(method, omega),
        )
    }
}
