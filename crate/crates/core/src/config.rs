//! Run configuration, derived physical scales and the dimensionless mode model.
//!
//! All user-facing lengths are SI unless the field says otherwise. Grid
//! extents are given in coherence units (`x_coh`, `tau_coh`) because the
//! interesting structure of the down-converted field lives on those scales.

use crate::error::{config_err, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;

/// Nonlinear crystal parameters. Defaults describe a 4 mm BBO crystal cut
/// for collinear type-II degenerate down-conversion of a 352 nm pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalConfig {
    /// Pump carrier wavelength in vacuum (m). Signal and idler are degenerate at twice this.
    pub pump_wavelength: f64,
    /// Crystal length (m).
    pub length: f64,
    /// Refractive index of the signal (ordinary) wave.
    pub n_signal: f64,
    /// Refractive index of the idler (extraordinary) wave.
    pub n_idler: f64,
    /// Inverse group velocities (s/m).
    pub group_signal: f64,
    pub group_idler: f64,
    /// Group-velocity dispersion coefficients (s^2/m).
    pub gvd_signal: f64,
    pub gvd_idler: f64,
    /// Spatial walk-off angles (rad).
    pub walkoff_signal: f64,
    pub walkoff_idler: f64,
    /// Collinear phase mismatch k_signal + k_idler - k_pump (1/m).
    pub mismatch: f64,
    /// Dimensionless peak parametric gain (coupling times crystal length).
    pub gain: f64,
    /// Inverse group velocity of the co-moving time frame (s/m).
    /// Defaults to the mean of signal and idler.
    pub frame_group: Option<f64>,
    /// Pump inverse group velocity, walk-off and GVD. Only used when the pump
    /// is propagated linearly through the crystal.
    pub pump_group: Option<f64>,
    pub pump_walkoff: f64,
    pub pump_gvd: f64,
    pub n_pump: Option<f64>,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        // BBO at theta = 48.2 deg, Sellmeier data of Eimerl et al.
        Self {
            pump_wavelength: 352e-9,
            length: 4e-3,
            n_signal: 1.663_889_350_359_277_5,
            n_idler: 1.595_828_027_963_919_2,
            group_signal: 5.645_462_977_500_281e-9,
            group_idler: 5.405_135_314_636_928e-9,
            gvd_signal: 9.082_915_416_727_878e-26,
            gvd_idler: 7.246_495_671_912_734e-26,
            walkoff_signal: 0.0,
            walkoff_idler: 0.071_528_241_362_228_53,
            mismatch: -18_213.586_454_071_105,
            gain: 4.0,
            frame_group: None,
            pump_group: None,
            pump_walkoff: 0.0,
            pump_gvd: 0.0,
            n_pump: None,
        }
    }
}

impl CrystalConfig {
    /// Degenerate signal/idler wavelength (m).
    pub fn wavelength(&self) -> f64 {
        2.0 * self.pump_wavelength
    }

    /// Vacuum wave number at the degenerate wavelength (1/m).
    pub fn k_vacuum(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// Wave numbers inside the crystal (1/m).
    pub fn k_signal(&self) -> f64 {
        self.n_signal * self.k_vacuum()
    }

    pub fn k_idler(&self) -> f64 {
        self.n_idler * self.k_vacuum()
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_wavelength", self.pump_wavelength),
            ("length", self.length),
            ("n_signal", self.n_signal),
            ("n_idler", self.n_idler),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return config_err(format!("crystal.{name} must be positive, got {v}"));
            }
        }
        let finite = [
            ("group_signal", self.group_signal),
            ("group_idler", self.group_idler),
            ("gvd_signal", self.gvd_signal),
            ("gvd_idler", self.gvd_idler),
            ("walkoff_signal", self.walkoff_signal),
            ("walkoff_idler", self.walkoff_idler),
            ("mismatch", self.mismatch),
            ("gain", self.gain),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return config_err(format!("crystal.{name} must be finite"));
            }
        }
        if self.gain < 0.0 {
            return config_err("crystal.gain must be non-negative");
        }
        if self.group_signal == self.group_idler {
            return config_err(
                "signal and idler group velocities coincide; the temporal coherence scale is undefined",
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpConfig {
    /// Gaussian waist (m), field amplitude falls to 1/e at this radius.
    pub waist: f64,
    /// Gaussian duration (s), field amplitude falls to 1/e at this delay.
    pub duration: f64,
    /// Ignore the transverse profile.
    pub plane_wave: bool,
    /// Ignore the temporal profile.
    pub cw: bool,
    /// Relative amplitude; the peak coupling is `crystal.gain * amplitude`.
    pub amplitude: f64,
    /// Propagate the pump linearly inside the crystal instead of freezing its envelope.
    pub propagate: bool,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            waist: 660e-6,
            duration: 1.5e-12,
            plane_wave: false,
            cw: false,
            amplitude: 1.0,
            propagate: false,
        }
    }
}

/// Simulation lattice. Extents are in coherence units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Transverse extent along x in units of `x_coh`.
    pub extent_x: f64,
    /// Transverse extent along y in units of `x_coh` (ignored for `ny = 1`).
    pub extent_y: f64,
    /// Time window in units of `tau_coh`.
    pub window_t: f64,
    /// Detector integration time in units of `tau_coh`; defaults to the window.
    pub detection_time: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 512,
            ny: 1,
            nt: 32,
            extent_x: 115.5,
            extent_y: 115.5,
            window_t: 12.0,
            detection_time: None,
        }
    }
}

impl GridConfig {
    pub fn dims(&self) -> [usize; 3] {
        [self.nt, self.ny, self.nx]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.extent_x / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        if self.ny == 1 {
            1.0
        } else {
            self.extent_y / self.ny as f64
        }
    }

    pub fn dt(&self) -> f64 {
        self.window_t / self.nt as f64
    }

    pub fn detection_time(&self) -> f64 {
        self.detection_time.unwrap_or(self.window_t)
    }

    fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("nt", self.nt)] {
            if n == 0 {
                return config_err(format!("grid.{name} must be at least 1"));
            }
            if n > 1 && n % 2 == 1 {
                return config_err(format!("grid.{name} must be even (or 1), got {n}"));
            }
        }
        if self.nx < 2 {
            return config_err("grid.nx must be at least 2");
        }
        for (name, v) in [("extent_x", self.extent_x), ("window_t", self.window_t)] {
            if !(v.is_finite() && v > 0.0) {
                return config_err(format!("grid.{name} must be positive"));
            }
        }
        if self.ny > 1 && !(self.extent_y.is_finite() && self.extent_y > 0.0) {
            return config_err("grid.extent_y must be positive");
        }
        let td = self.detection_time();
        if !(td.is_finite() && td > 0.0) {
            return config_err("grid.detection_time must be positive");
        }
        if td < self.window_t * (1.0 - 1e-12) {
            return config_err(format!(
                "detection time {td} is shorter than the simulated window {}; \
                 it must cover the full window",
                self.window_t
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Second-order symmetric splitting.
    Strang,
    /// Fourth-order composition of symmetric steps.
    Yoshida4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// Split-step integration with the finite pump.
    SplitStep,
    /// Exact plane-wave transfer functions; requires a plane-wave cw pump.
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of longitudinal steps through the crystal.
    pub nz: usize,
    pub integrator: Integrator,
    pub propagation: Propagation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nz: 200,
            integrator: Integrator::Strang,
            propagation: Propagation::SplitStep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocalShiftMode {
    None,
    /// Shift the idler image plane to cancel the quadratic gain phase.
    Optimized,
    /// Use `focal_shift` as given.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    /// Focal length of all lenses (m).
    pub focal_length: f64,
    pub focal_shift_mode: FocalShiftMode,
    /// Idler plane shift in metres when `focal_shift_mode = "manual"`.
    pub focal_shift: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            focal_length: 0.05,
            focal_shift_mode: FocalShiftMode::Optimized,
            focal_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectKind {
    None,
    AmplitudeSlit,
    PhaseSlit,
    Bitmap,
}

/// Object mask. Dimensions are in pixels of the plane the object sits in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectConfig {
    pub kind: ObjectKind,
    /// Slit width.
    pub width: f64,
    /// Slit centre-to-centre separation.
    pub separation: f64,
    /// Displacement of the slit pair along x. The reference value puts the
    /// slits where the walked-off signal near field is strongest, so both see
    /// about the same gain.
    pub offset: f64,
    /// Grayscale image for `kind = "bitmap"`.
    pub path: Option<String>,
    /// Binarisation threshold for bitmaps (fraction of full scale); none keeps grey levels.
    pub threshold: Option<f64>,
    /// Treat a binarised bitmap as a phase object (0 -> -1, 1 -> +1).
    pub phase: bool,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            kind: ObjectKind::AmplitudeSlit,
            width: 9.0,
            separation: 33.0,
            offset: -23.0,
            path: None,
            threshold: Some(0.5),
            phase: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoProfile {
    Plane,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRecipe {
    /// Use `psi` and `tilt` exactly as given.
    Manual,
    /// Constant phase matched to the exact gain phase at the gain centre.
    Plain,
    /// Phase, tilt and focal shift from the expansion of the gain phase.
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoTemporal {
    Cw,
    Pulsed,
}

/// Local oscillator of one arm. Spatial quantities are in units of the
/// detection plane (`x_coh` in near-field planes, `x_f` in far-field planes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoConfig {
    pub profile: LoProfile,
    pub amplitude: f64,
    pub waist: f64,
    pub center: f64,
    /// How the idler LO phase is chosen; ignored for the signal LO.
    pub recipe: PhaseRecipe,
    /// Constant phase (rad). For the idler with a non-manual recipe it is
    /// added on top of the recipe value.
    pub psi: f64,
    /// Linear phase gradient (rad per plane unit).
    pub tilt: f64,
    pub temporal: LoTemporal,
    /// Pulse duration in `tau_coh`; defaults to the pump duration.
    pub duration: Option<f64>,
    /// Pulse delay in `tau_coh`; the idler default compensates the gain delay.
    pub delay: Option<f64>,
}

impl Default for LoConfig {
    fn default() -> Self {
        Self {
            profile: LoProfile::Plane,
            amplitude: 1.0,
            waist: 1.0,
            center: 0.0,
            recipe: PhaseRecipe::Optimized,
            psi: 0.0,
            tilt: 0.0,
            temporal: LoTemporal::Pulsed,
            duration: None,
            delay: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoPairConfig {
    pub signal: LoConfig,
    pub idler: LoConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Object in the near field, both arms imaged to the far field.
    PointlikeFar,
    /// Object in the near field, idler arm imaged by a telescope.
    PointlikeNear,
    /// As `PointlikeNear` but with a single-lens 2f-2f idler arm.
    PointlikeNear2f,
    /// Object in the signal far field, bucket signal detector, idler far field.
    BucketNear,
    /// Object in the signal far field, bucket signal detector, idler telescope.
    BucketFar,
}

impl Geometry {
    pub fn is_bucket(self) -> bool {
        matches!(self, Geometry::BucketNear | Geometry::BucketFar)
    }

    /// Whether the idler detection plane is a far-field plane.
    pub fn idler_far(self) -> bool {
        matches!(self, Geometry::PointlikeFar | Geometry::BucketNear)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Geometry::PointlikeFar => "pointlike-far",
            Geometry::PointlikeNear => "pointlike-near",
            Geometry::PointlikeNear2f => "pointlike-near-2f",
            Geometry::BucketNear => "bucket-near",
            Geometry::BucketFar => "bucket-far",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Signal pixel fixed, idler scanned.
    Fixed,
    /// Idler pixel fixed, signal scanned.
    Scan,
    /// Signal detector integrates the whole plane.
    Bucket,
    /// Average over all signal pixels at fixed sum coordinate.
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionMode {
    /// Exact on the periodic lattice; covers the full grid.
    Circular,
    /// Linear convolution of zero-padded maps; covers only overlapping shifts.
    ZeroPadded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub estimator: EstimatorKind,
    /// Fixed signal pixel coordinate (plane units); defaults to the gain centre.
    pub x1: Option<f64>,
    /// Fixed idler pixel coordinate for the scan estimator (plane units).
    pub x2: f64,
    pub convolution: ConvolutionMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::PointlikeFar,
            estimator: EstimatorKind::Fixed,
            x1: None,
            x2: 0.0,
            convolution: ConvolutionMode::Circular,
        }
    }
}

/// Execution settings. These never change results and are excluded from the
/// configuration hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub shots: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Shots per deterministic reduction batch.
    pub batch: usize,
    /// Shot counts at which intermediate estimates are recorded.
    pub checkpoints: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            shots: 2000,
            seed: 7,
            threads: None,
            batch: 25,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub crystal: CrystalConfig,
    pub pump: PumpConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub optics: OpticsConfig,
    pub object: ObjectConfig,
    pub lo: LoPairConfig,
    pub experiment: ExperimentConfig,
    pub run: RunConfig,
}

impl Config {
    /// The reference configuration (all defaults).
    pub fn reference() -> Self {
        Self::default()
    }

    /// Parse a TOML document and apply `section.key=value` overrides.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("cannot parse config: {e}")))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.crystal.validate()?;
        self.grid.validate()?;
        if self.solver.nz == 0 {
            return config_err("solver.nz must be at least 1");
        }
        if !(self.optics.focal_length.is_finite() && self.optics.focal_length > 0.0) {
            return config_err("optics.focal_length must be positive");
        }
        if !self.pump.plane_wave && !(self.pump.waist.is_finite() && self.pump.waist > 0.0) {
            return config_err("pump.waist must be positive");
        }
        if !self.pump.cw && !(self.pump.duration.is_finite() && self.pump.duration > 0.0) {
            return config_err("pump.duration must be positive");
        }
        if self.solver.propagation == Propagation::PlaneWave && !(self.pump.plane_wave && self.pump.cw)
        {
            return config_err(
                "plane-wave propagation needs pump.plane_wave = true and pump.cw = true",
            );
        }
        if self.pump.propagate && self.crystal.pump_group.is_none() {
            return config_err("pump.propagate needs crystal.pump_group");
        }
        if self.object.kind == ObjectKind::Bitmap && self.object.path.is_none() {
            return config_err("object.kind = \"bitmap\" needs object.path");
        }
        if self.run.batch == 0 {
            return config_err("run.batch must be at least 1");
        }
        for lo in [&self.lo.signal, &self.lo.idler] {
            if lo.profile == LoProfile::Gaussian && !(lo.waist > 0.0) {
                return config_err("Gaussian LO waist must be positive");
            }
        }
        Ok(())
    }

    /// Hash of everything that determines the physics of a run (all
    /// sections except `[run]`).
    pub fn hash(&self) -> String {
        let mut physics = self.clone();
        physics.run = RunConfig::default();
        let digest = Sha256::digest(physics.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return config_err(format!("override `{spec}` has an empty key"));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = table;
    for key in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{spec}`: `{key}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Characteristic scales of the down-converted field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    /// Vacuum wave number at the degenerate wavelength (1/m).
    pub k_vacuum: f64,
    /// Transverse gain bandwidth (1/m).
    pub q0: f64,
    /// Spectral gain bandwidth (1/s).
    pub omega0: f64,
    /// Near-field coherence length `1/q0` (m).
    pub x_coh: f64,
    /// Coherence time `1/omega0` (s).
    pub tau_coh: f64,
    /// Walk-off displacement of the gain centre in the far field, along x (1/m).
    /// The gain is centred at `-q_center`.
    pub q_center: f64,
    /// Gain-dependent slope of the gain phase.
    pub psi_g: f64,
    /// Image-plane shift that cancels the quadratic gain phase (m).
    pub focal_shift: f64,
    /// Far-field unit `f q0 / k_vacuum` (m).
    pub x_f: f64,
}

/// `tanh(g)/(2g)`, finite at `g = 0`.
pub fn gain_slope(g: f64) -> f64 {
    if g.abs() < 1e-4 {
        0.5 * (1.0 - g * g / 3.0)
    } else {
        g.tanh() / (2.0 * g)
    }
}

pub fn derive_scales(crystal: &CrystalConfig, focal_length: f64) -> Result<DerivedScales> {
    crystal.validate()?;
    if !(focal_length.is_finite() && focal_length > 0.0) {
        return config_err("focal length must be positive");
    }
    let l = crystal.length;
    let kv = crystal.k_vacuum();
    let inv_k = 1.0 / crystal.k_signal() + 1.0 / crystal.k_idler();
    let q0 = (2.0 / (l * inv_k)).sqrt();
    let omega0 = 1.0 / ((crystal.group_signal - crystal.group_idler).abs() * l);
    let q_center = 0.5 * (crystal.walkoff_idler - crystal.walkoff_signal) * l * q0 * q0;
    let psi_g = gain_slope(crystal.gain);
    let focal_shift = -(1.0 / crystal.n_signal + 1.0 / crystal.n_idler) * psi_g * l;
    let scales = DerivedScales {
        k_vacuum: kv,
        q0,
        omega0,
        x_coh: 1.0 / q0,
        tau_coh: 1.0 / omega0,
        q_center,
        psi_g,
        focal_shift,
        x_f: focal_length * q0 / kv,
    };
    if [q0, omega0, scales.x_f].iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return config_err("derived scales are degenerate");
    }
    Ok(scales)
}

impl DerivedScales {
    /// Gain centre in far-field units (`q_center / q0`).
    pub fn q_center_hat(&self) -> f64 {
        self.q_center / self.q0
    }

    /// Focal shift expressed as the coefficient of `|q|^2` (in `q0` units)
    /// of the propagation phase it imprints.
    pub fn focal_phase_coefficient(&self, shift: f64) -> f64 {
        -shift * self.q0 * self.q0 / (2.0 * self.k_vacuum)
    }
}

/// Per-beam coefficients of the dimensionless linear dispersion.
///
/// With `q` in units of `q0`, `omega` in units of `omega0` and `z` in units
/// of the crystal length, the phase accumulated per unit length is
/// `group*omega + gvd*omega^2 + walkoff*q_x - diffraction*|q|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamCoefficients {
    pub group: f64,
    pub gvd: f64,
    pub walkoff: f64,
    pub diffraction: f64,
}

impl BeamCoefficients {
    #[inline]
    pub fn delta(&self, qx: f64, qy: f64, omega: f64) -> f64 {
        self.group * omega + self.gvd * omega * omega + self.walkoff * qx
            - self.diffraction * (qx * qx + qy * qy)
    }
}

/// Dimensionless description of the parametric interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeModel {
    /// Peak coupling times crystal length.
    pub gain: f64,
    /// Phase mismatch times crystal length.
    pub mismatch: f64,
    /// Signal (index 0) and idler (index 1).
    pub beams: [BeamCoefficients; 2],
}

impl ModeModel {
    pub fn new(crystal: &CrystalConfig, scales: &DerivedScales) -> Self {
        Self::with_gain(crystal, scales, crystal.gain)
    }

    pub fn with_gain(crystal: &CrystalConfig, scales: &DerivedScales, gain: f64) -> Self {
        let l = crystal.length;
        let frame = crystal
            .frame_group
            .unwrap_or(0.5 * (crystal.group_signal + crystal.group_idler));
        let coeff = |group: f64, gvd: f64, walkoff: f64, k: f64| BeamCoefficients {
            group: (group - frame) * l * scales.omega0,
            gvd: 0.5 * gvd * l * scales.omega0 * scales.omega0,
            walkoff: walkoff * l * scales.q0,
            diffraction: scales.q0 * scales.q0 * l / (2.0 * k),
        };
        Self {
            gain,
            mismatch: crystal.mismatch * l,
            beams: [
                coeff(
                    crystal.group_signal,
                    crystal.gvd_signal,
                    crystal.walkoff_signal,
                    crystal.k_signal(),
                ),
                coeff(
                    crystal.group_idler,
                    crystal.gvd_idler,
                    crystal.walkoff_idler,
                    crystal.k_idler(),
                ),
            ],
        }
    }
}
