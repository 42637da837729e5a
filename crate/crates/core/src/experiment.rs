//! End-to-end experiments: vacuum sampling, crystal, optics, homodyne
//! detection and correlation, with several probes sharing each shot.
//!
//! Shots are processed in batches. Within a batch the per-shot samples are
//! computed independently (in parallel when enabled) and then folded into the
//! running moments in shot order, so results do not depend on the thread
//! count or execution mode.

use crate::config::{
    derive_scales, Config, DerivedScales, EstimatorKind, FocalShiftMode, Geometry, LoConfig,
    ModeModel, PhaseRecipe,
};
use crate::correlator::{
    sample_bucket, sample_fixed, sample_scan, Convolver, EstimatorTag, Quadrature, RunningMoments,
};
use crate::error::{config_err, Error, Result};
use crate::gain::{phase_expansion, PhaseExpansion};
use crate::homodyne::{
    lo_phase_bucket, lo_phase_farfield, lo_phase_nearfield, lo_temporal_delay, measure_pair, measure_quadrature,
    BucketVariant, LocalOscillator, PhaseLaw, RecipeInputs,
};
use crate::lattice::{Grid, Plane, PlaneKind, C64};
use crate::optics::{focal_shift_spectrum, object_from_config, Bench, Lens, ObjectMask};
use crate::oracle::{self, Integration, OracleCurve, OracleSetup, TemporalFactor, TemporalMode};
use crate::wigner::{sample_vacuum, walkoff_preflight, Crystal, ShotSeed};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    /// Data-parallel over the shots of a batch; sequential when the
    /// `parallel` feature is off.
    Parallel,
}

/// Where the idler is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdlerPath {
    Far,
    Telescope,
    TwoF,
}

impl IdlerPath {
    pub fn of(geometry: Geometry) -> Self {
        match geometry {
            Geometry::PointlikeFar | Geometry::BucketNear => IdlerPath::Far,
            Geometry::PointlikeNear | Geometry::BucketFar => IdlerPath::Telescope,
            Geometry::PointlikeNear2f => IdlerPath::TwoF,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug)]
pub struct CorrelationProbe {
    pub geometry: Geometry,
    pub estimator: EstimatorKind,
    pub object: ObjectMask,
    pub signal_lo: LocalOscillator,
    pub idler_lo: LocalOscillator,
    /// Fixed signal pixel (far grid index).
    pub x1_index: usize,
    /// Fixed idler pixel for the scan estimator.
    pub x2_index: usize,
    convolver: Option<Convolver>,
}

#[derive(Debug)]
pub enum ProbeKind {
    Correlation(Box<CorrelationProbe>),
    /// Mean of `sum_t dt |a(x, t)|^2` in an idler detection plane.
    IdlerIntensity(IdlerPath),
    /// The same for the signal at the crystal exit.
    SignalNearIntensity,
    /// `A_signal(k) A_idler(-k)` over all crystal output modes.
    ModeCovariance,
}

#[derive(Debug)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
}

/// Accumulated moments of one probe. Correlation probes hold the real and
/// imaginary quadrature estimates, mode probes the real and imaginary parts,
/// intensity probes a single component.
#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub name: String,
    pub plane: Plane,
    pub nx: usize,
    pub ny: usize,
    pub components: Vec<RunningMoments>,
}

impl ProbeResult {
    pub fn shots(&self) -> u64 {
        self.components.first().map(|c| c.count).unwrap_or(0)
    }

    pub fn component(&self, q: Quadrature) -> &RunningMoments {
        match q {
            Quadrature::Real => &self.components[0],
            Quadrature::Imag => &self.components[self.components.len() - 1],
        }
    }
}

/// State of every probe at an intermediate shot count.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub shots: usize,
    pub results: Vec<ProbeResult>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<ProbeResult>,
    pub checkpoints: Vec<Checkpoint>,
    pub shots: usize,
    pub elapsed: Duration,
}

impl RunOutput {
    pub fn result(&self, name: &str) -> Option<&ProbeResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

/// Everything derived from a configuration that does not change per shot.
#[derive(Debug)]
pub struct Experiment {
    pub cfg: Config,
    pub scales: DerivedScales,
    pub model: ModeModel,
    pub expansion: PhaseExpansion,
    pub grid: Grid,
    pub lens: Lens,
    /// Coefficient of the idler focal-shift phase `exp(i c q^2)`.
    pub focal_coefficient: f64,
    pub crystal: Crystal,
    pub bench: Bench,
    pub probes: Vec<Probe>,
}

type ShotSamples = Vec<Vec<Vec<f64>>>;

impl Experiment {
    /// Build the pipeline without probes.
    pub fn new(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let scales = derive_scales(&cfg.crystal, cfg.optics.focal_length)?;
        let model = ModeModel::new(&cfg.crystal, &scales);
        let grid = Grid::from_config(&cfg.grid);
        if let Some(w) = walkoff_preflight(&model, &grid) {
            log::warn!("{w}");
        }
        let mut oracle_model = model;
        oracle_model.gain *= cfg.pump.amplitude;
        let expansion = phase_expansion(&oracle_model);
        let focal_coefficient = match cfg.optics.focal_shift_mode {
            FocalShiftMode::None => 0.0,
            FocalShiftMode::Optimized => scales.focal_phase_coefficient(scales.focal_shift),
            FocalShiftMode::Manual => scales.focal_phase_coefficient(cfg.optics.focal_shift),
        };
        let crystal = Crystal::from_config(&cfg, &model, grid, &scales);
        let bench = Bench::new(grid);
        let lens = Lens { focal_length: cfg.optics.focal_length, k_vacuum: scales.k_vacuum };
        Ok(Self {
            cfg,
            scales,
            model: oracle_model,
            expansion,
            grid,
            lens,
            focal_coefficient,
            crystal,
            bench,
            probes: Vec::new(),
        })
    }

    /// Pipeline with the single probe described by `[experiment]`.
    pub fn from_config(cfg: Config) -> Result<Self> {
        let mut e = Self::new(cfg)?;
        let (geometry, estimator) = (e.cfg.experiment.geometry, e.cfg.experiment.estimator);
        let object = e.object_for(geometry)?;
        let probe = e.correlation_probe(geometry, estimator, object, &e.cfg.lo.clone().signal, &e.cfg.lo.clone().idler)?;
        e.add_probe("main", ProbeKind::Correlation(Box::new(probe)));
        Ok(e)
    }

    pub fn add_probe(&mut self, name: &str, kind: ProbeKind) {
        self.probes.push(Probe { name: name.into(), kind });
    }

    pub fn near_plane(&self) -> Plane {
        Plane { kind: PlaneKind::Near, step: [self.grid.dx, self.grid.dy], unit: self.scales.x_coh }
    }

    pub fn far_plane(&self) -> Plane {
        self.lens.fourier_plane(&self.near_plane(), [self.grid.nx, self.grid.ny])
    }

    /// Detection plane of the idler for a geometry.
    pub fn idler_plane(&self, geometry: Geometry) -> Plane {
        if geometry.idler_far() {
            self.far_plane()
        } else {
            self.near_plane()
        }
    }

    /// Object from `[object]`, placed in the plane the geometry needs.
    pub fn object_for(&self, geometry: Geometry) -> Result<ObjectMask> {
        let plane = if geometry.is_bucket() { PlaneKind::Far } else { PlaneKind::Near };
        object_from_config(&self.cfg, self.grid.nx, self.grid.ny, plane)
    }

    /// Gain centre in far-field units.
    pub fn gain_center(&self) -> f64 {
        -self.scales.q_center_hat()
    }

    /// Far pixel used as the fixed signal point.
    pub fn x1_index(&self) -> usize {
        let x1 = self.cfg.experiment.x1.unwrap_or_else(|| self.gain_center());
        self.far_plane().nearest(x1, self.grid.nx, 0)
    }

    fn pump_duration(&self) -> f64 {
        self.cfg.pump.duration / self.scales.tau_coh
    }

    /// Idler LO delay that compensates the group delay of the gain phase.
    pub fn idler_delay(&self) -> f64 {
        -lo_temporal_delay(&self.expansion)
    }

    fn curvature(&self) -> f64 {
        let p = self.near_plane();
        -self.lens.k_vacuum * p.unit * p.unit / (2.0 * self.lens.focal_length)
    }

    /// Signal and idler LOs for a geometry, with the idler phase law from its recipe.
    pub fn local_oscillators(
        &self,
        geometry: Geometry,
        signal: &LoConfig,
        idler: &LoConfig,
        x1_index: usize,
    ) -> Result<(LocalOscillator, LocalOscillator)> {
        let far = self.far_plane();
        let lo1 = LocalOscillator::from_config(signal, 0, far, &self.grid, self.pump_duration(), 0.0)?;
        let mut lo2 = LocalOscillator::from_config(
            idler,
            1,
            self.idler_plane(geometry),
            &self.grid,
            self.pump_duration(),
            self.idler_delay(),
        )?;
        if idler.recipe == PhaseRecipe::Manual {
            return Ok((lo1, lo2));
        }
        let r = RecipeInputs {
            expansion: &self.expansion,
            center_phase: self.model.correlation_phase(self.gain_center(), 0.0, 0.0),
            optimized: idler.recipe == PhaseRecipe::Optimized,
            focal_shift: self.focal_coefficient != 0.0,
        };
        let x1 = far.coord(x1_index, self.grid.nx, 0);
        let phi1 = lo1.phase_x(x1);
        let signal_law = PhaseLaw { psi: lo1.psi, tilt: lo1.tilt };
        let law = match geometry {
            Geometry::PointlikeFar => lo_phase_farfield(&r, phi1)?,
            Geometry::PointlikeNear => lo_phase_nearfield(&r, x1, phi1)?,
            Geometry::PointlikeNear2f => {
                // The single-lens image is parity inverted and curved.
                let l = lo_phase_nearfield(&r, x1, phi1)?;
                lo2.curvature = self.curvature();
                PhaseLaw { psi: l.psi, tilt: -l.tilt }
            }
            Geometry::BucketNear => lo_phase_bucket(&r, BucketVariant::Near, signal_law, 0.0)?,
            Geometry::BucketFar => {
                let center = self.object_center_far();
                lo_phase_bucket(&r, BucketVariant::Far, signal_law, center)?
            }
        };
        lo2.psi = law.psi + idler.psi;
        lo2.tilt = law.tilt;
        Ok((lo1, lo2))
    }

    /// Centre of a far-plane object in far-field units.
    fn object_center_far(&self) -> f64 {
        match self.cfg.object.kind {
            crate::config::ObjectKind::AmplitudeSlit | crate::config::ObjectKind::PhaseSlit => {
                self.cfg.object.offset * self.far_plane().step[0]
            }
            _ => 0.0,
        }
    }

    pub fn correlation_probe(
        &self,
        geometry: Geometry,
        estimator: EstimatorKind,
        object: ObjectMask,
        signal: &LoConfig,
        idler: &LoConfig,
    ) -> Result<CorrelationProbe> {
        let x1_index = self.x1_index();
        let (signal_lo, idler_lo) = self.local_oscillators(geometry, signal, idler, x1_index)?;
        let idler_plane = self.idler_plane(geometry);
        let x2_index = idler_plane.nearest(self.cfg.experiment.x2, self.grid.nx, 0);
        let convolver = match estimator {
            EstimatorKind::Convolution => {
                if geometry != Geometry::PointlikeFar {
                    return config_err("the convolution estimator needs the far-field point-like geometry");
                }
                Some(Convolver::new(self.grid.nx, self.grid.ny, self.cfg.experiment.convolution))
            }
            EstimatorKind::Bucket if !geometry.is_bucket() => {
                return config_err("the bucket estimator needs a bucket geometry");
            }
            EstimatorKind::Fixed | EstimatorKind::Scan if geometry.is_bucket() => {
                return config_err("bucket geometries use the bucket estimator");
            }
            _ => None,
        };
        let object_plane = if geometry.is_bucket() { PlaneKind::Far } else { PlaneKind::Near };
        if object.plane != object_plane || object.nx != self.grid.nx || object.ny != self.grid.ny {
            return config_err("object mask does not match the geometry");
        }
        Ok(CorrelationProbe { geometry, estimator, object, signal_lo, idler_lo, x1_index, x2_index, convolver })
    }

    fn probe_layout(&self, probe: &Probe) -> (Plane, usize, usize, usize) {
        let g = &self.grid;
        match &probe.kind {
            ProbeKind::Correlation(c) => {
                let plane = match c.estimator {
                    EstimatorKind::Scan => c.signal_lo.plane,
                    EstimatorKind::Convolution => self.far_plane(),
                    _ => c.idler_lo.plane,
                };
                (plane, g.nx, g.ny, 2)
            }
            ProbeKind::IdlerIntensity(path) => {
                let plane = if *path == IdlerPath::Far { self.far_plane() } else { self.near_plane() };
                (plane, g.nx, g.ny, 1)
            }
            ProbeKind::SignalNearIntensity => (self.near_plane(), g.nx, g.ny, 1),
            ProbeKind::ModeCovariance => (self.near_plane(), g.len(), 1, 2),
        }
    }

    /// Process one shot into per-probe samples.
    pub fn shot(&self, index: u64) -> Result<ShotSamples> {
        let mut state = sample_vacuum(&self.grid, ShotSeed { master: self.cfg.run.seed, index });
        self.crystal.propagate(&mut state.signal, &mut state.idler)?;
        self.detect(&state.signal, &state.idler)
    }

    /// Optics and detection for crystal output spectra (FFT order, unitary).
    /// Linear in the spectra up to the final quadratic correlation step.
    pub fn detect(&self, signal: &[C64], idler: &[C64]) -> Result<ShotSamples> {
        if signal.iter().chain(idler).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Numeric("crystal output contains NaN or infinity".into()));
        }
        let g = self.grid;
        let near = self.near_plane();
        let mut sig_near = None;
        let mut sig_far = None;
        let mut idl: [Option<crate::lattice::FieldLattice>; 3] = [None, None, None];
        let mut out = Vec::with_capacity(self.probes.len());
        for probe in &self.probes {
            match &probe.kind {
                ProbeKind::ModeCovariance => {
                    let n = g.len();
                    let mut re = vec![0.0; n];
                    let mut im = vec![0.0; n];
                    for kt in 0..g.nt {
                        for ky in 0..g.ny {
                            for kx in 0..g.nx {
                                let i = g.index(kt, ky, kx);
                                let p = g.index(Grid::mirror(kt, g.nt), Grid::mirror(ky, g.ny), Grid::mirror(kx, g.nx));
                                let v = signal[i] * idler[p];
                                re[i] = v.re;
                                im[i] = v.im;
                            }
                        }
                    }
                    out.push(vec![re, im]);
                }
                ProbeKind::IdlerIntensity(path) => {
                    let f = self.idler_field(idler, *path, &mut idl)?;
                    out.push(vec![time_integrated_intensity(&f.data, &g)]);
                }
                ProbeKind::SignalNearIntensity => {
                    if sig_near.is_none() {
                        sig_near = Some(self.bench.exit_field(signal, near));
                    }
                    let f = sig_near.as_ref().expect("just set");
                    out.push(vec![time_integrated_intensity(&f.data, &g)]);
                }
                ProbeKind::Correlation(c) => {
                    let s_field = if c.geometry.is_bucket() {
                        if sig_far.is_none() {
                            let mut f = self.bench.exit_field(signal, near);
                            self.bench.apply_ff(&mut f, &self.lens)?;
                            sig_far = Some(f);
                        }
                        let mut f = sig_far.clone().expect("just set");
                        self.bench.apply_object(&mut f, &c.object)?;
                        f
                    } else {
                        if sig_near.is_none() {
                            sig_near = Some(self.bench.exit_field(signal, near));
                        }
                        let mut f = sig_near.clone().expect("just set");
                        self.bench.apply_object(&mut f, &c.object)?;
                        self.bench.apply_ff(&mut f, &self.lens)?;
                        f
                    };
                    let i_field = self.idler_field(idler, IdlerPath::of(c.geometry), &mut idl)?;
                    let z1 = measure_quadrature(&s_field, &c.signal_lo)?;
                    let [z2r, z2i] = measure_pair(i_field, &c.idler_lo)?;
                    let pair = match c.estimator {
                        EstimatorKind::Fixed => vec![sample_fixed(&z1, &z2r, c.x1_index)?, sample_fixed(&z1, &z2i, c.x1_index)?],
                        EstimatorKind::Scan => vec![sample_scan(&z1, &z2r, c.x2_index)?, sample_scan(&z1, &z2i, c.x2_index)?],
                        EstimatorKind::Bucket => vec![sample_bucket(&z1, &z2r)?, sample_bucket(&z1, &z2i)?],
                        EstimatorKind::Convolution => {
                            let conv = c.convolver.as_ref().expect("convolution probe has a convolver");
                            vec![conv.convolve(&z1, &z2r)?, conv.convolve(&z1, &z2i)?]
                        }
                    };
                    out.push(pair);
                }
            }
        }
        Ok(out)
    }

    fn idler_field<'a>(
        &self,
        idler: &[C64],
        path: IdlerPath,
        cache: &'a mut [Option<crate::lattice::FieldLattice>; 3],
    ) -> Result<&'a crate::lattice::FieldLattice> {
        let slot = path.index();
        if cache[slot].is_none() {
            let mut spec = idler.to_vec();
            focal_shift_spectrum(&mut spec, &self.grid, self.focal_coefficient);
            let mut f = self.bench.exit_field(&spec, self.near_plane());
            match path {
                IdlerPath::Far => self.bench.apply_ff(&mut f, &self.lens)?,
                IdlerPath::Telescope => self.bench.apply_telescope(&mut f)?,
                IdlerPath::TwoF => self.bench.apply_2f2f(&mut f, &self.lens)?,
            }
            cache[slot] = Some(f);
        }
        Ok(cache[slot].as_ref().expect("just set"))
    }

    fn empty_results(&self) -> Vec<ProbeResult> {
        self.probes
            .iter()
            .map(|p| {
                let (plane, nx, ny, k) = self.probe_layout(p);
                ProbeResult { name: p.name.clone(), plane, nx, ny, components: vec![RunningMoments::new(nx * ny); k] }
            })
            .collect()
    }

    /// Run `shots` shots starting at shot index 0.
    pub fn run(&self, shots: usize, mode: ExecutionMode, threads: Option<usize>) -> Result<RunOutput> {
        match (mode, threads) {
            #[cfg(feature = "parallel")]
            (ExecutionMode::Parallel, Some(n)) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
                pool.install(|| self.run_inner(shots, mode))
            }
            _ => self.run_inner(shots, mode),
        }
    }

    fn run_inner(&self, shots: usize, mode: ExecutionMode) -> Result<RunOutput> {
        let start = Instant::now();
        let mut results = self.empty_results();
        let mut checkpoints = Vec::new();
        let mut marks: Vec<usize> = self.cfg.run.checkpoints.iter().copied().filter(|&c| c > 0 && c <= shots).collect();
        marks.sort_unstable();
        marks.dedup();
        let mut next_mark = marks.iter().peekable();
        let batch = self.cfg.run.batch.max(1);
        let mut done = 0usize;
        while done < shots {
            let mut end = (done + batch).min(shots);
            if let Some(&&m) = next_mark.peek() {
                end = end.min(m);
            }
            let samples = self.batch(done as u64..end as u64, mode)?;
            for shot in samples {
                for (res, probe) in results.iter_mut().zip(shot) {
                    for (acc, s) in res.components.iter_mut().zip(&probe) {
                        acc.push(s);
                    }
                }
            }
            done = end;
            if next_mark.peek().is_some_and(|&&m| m == done) {
                next_mark.next();
                checkpoints.push(Checkpoint { shots: done, results: results.clone() });
            }
            log::debug!("{done}/{shots} shots");
        }
        Ok(RunOutput { results, checkpoints, shots, elapsed: start.elapsed() })
    }

    fn batch(&self, range: std::ops::Range<u64>, mode: ExecutionMode) -> Result<Vec<ShotSamples>> {
        match mode {
            #[cfg(feature = "parallel")]
            ExecutionMode::Parallel => {
                use rayon::prelude::*;
                range.into_par_iter().map(|i| self.shot(i)).collect()
            }
            _ => range.map(|i| self.shot(i)).collect(),
        }
    }

    /// Temporal factor matching the LOs of a probe (`Pulsed`) or the cw limit.
    pub fn temporal_factor(&self, mode: TemporalMode, lo1: &LocalOscillator, lo2: &LocalOscillator) -> Result<TemporalFactor> {
        oracle::temporal_factor(mode, lo1, lo2, &self.grid)
    }

    /// Oracle curve for a correlation probe. Bucket-far curves can be
    /// multiplied by a Gaussian weight afterwards.
    pub fn oracle_for(
        &self,
        probe: &CorrelationProbe,
        temporal: TemporalMode,
        integration: Integration,
        plateau: bool,
    ) -> Result<OracleCurve> {
        let t = self.temporal_factor(temporal, &probe.signal_lo, &probe.idler_lo)?;
        let setup = OracleSetup {
            model: &self.model,
            grid: self.grid,
            focal_coefficient: self.focal_coefficient,
            temporal: &t,
            signal_lo: &probe.signal_lo,
            idler_lo: &probe.idler_lo,
            integration,
            plateau: plateau.then_some(oracle::Plateau { center: self.gain_center(), expansion: self.expansion }),
        };
        let mut curve = match (probe.geometry, probe.estimator) {
            (Geometry::PointlikeFar, EstimatorKind::Fixed) => oracle::pointlike_far(&setup, &probe.object, probe.x1_index)?,
            (Geometry::PointlikeFar, EstimatorKind::Scan) => oracle::pointlike_far_scan(&setup, &probe.object, probe.x2_index)?,
            (Geometry::PointlikeFar, EstimatorKind::Convolution) => {
                oracle::convolution_expectation(&setup, &probe.object, self.cfg.experiment.convolution)?
            }
            (Geometry::PointlikeNear, EstimatorKind::Fixed) => {
                oracle::pointlike_near(&setup, &probe.object, probe.x1_index, None)?
            }
            (Geometry::PointlikeNear2f, EstimatorKind::Fixed) => {
                oracle::pointlike_near(&setup, &probe.object, probe.x1_index, Some(self.curvature()))?
            }
            (Geometry::BucketNear, _) => oracle::bucket_near(&setup, &probe.object)?,
            (Geometry::BucketFar, _) => oracle::bucket_far(&setup, &probe.object)?,
            (g, e) => return config_err(format!("no oracle for geometry {} with the {e:?} estimator", g.tag())),
        };
        curve.plane = match probe.estimator {
            EstimatorKind::Scan => probe.signal_lo.plane,
            _ => curve.plane,
        };
        Ok(curve)
    }

    /// The main probe, if it is a correlation probe.
    pub fn correlation(&self, name: &str) -> Option<&CorrelationProbe> {
        self.probes.iter().find(|p| p.name == name).and_then(|p| match &p.kind {
            ProbeKind::Correlation(c) => Some(c.as_ref()),
            _ => None,
        })
    }
}

fn time_integrated_intensity(data: &[C64], g: &Grid) -> Vec<f64> {
    let plane = g.spatial_len();
    let mut acc = vec![0.0; plane];
    for slice in data.chunks_exact(plane) {
        for (a, c) in acc.iter_mut().zip(slice) {
            *a += c.norm_sqr() * g.dt;
        }
    }
    acc
}

pub fn estimator_tag(e: EstimatorKind) -> EstimatorTag {
    match e {
        EstimatorKind::Fixed => EstimatorTag::Fixed,
        EstimatorKind::Scan => EstimatorTag::Scan,
        EstimatorKind::Bucket => EstimatorTag::Bucket,
        EstimatorKind::Convolution => EstimatorTag::Convolution,
    }
}

/// Gain band of the far field: points where the high-gain exponent is
/// positive, `sigma^2 - (total mismatch / 2)^2 > 0` at zero frequency.
pub fn gain_band(model: &ModeModel, q: &[f64]) -> Vec<bool> {
    q.iter()
        .map(|&x| {
            let d = model.mismatch_total(0, x, 0.0, 0.0);
            model.gain * model.gain - 0.25 * d * d > 0.0
        })
        .collect()
}

/// Plateau of a curve: points with modulus at least half its maximum.
pub fn plateau(values: &[C64]) -> Vec<bool> {
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    values.iter().map(|v| v.norm() >= 0.5 * peak).collect()
}
