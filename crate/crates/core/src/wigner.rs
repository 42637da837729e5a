//! Truncated-Wigner sampling of the vacuum and propagation through the crystal.
//!
//! Fields are c-number lattices whose cells carry vacuum noise of variance
//! 1/2 per mode (1/4 per quadrature). A frozen-envelope pump couples the
//! signal and idler; the linear part is applied in the spectral domain and
//! the coupling exactly in the position domain.

use crate::config::{Config, Integrator, ModeModel, Propagation};
use crate::error::{Error, Result};
use crate::gain::GainTable;
use crate::lattice::{Axes, Grid, Spectral, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Identifies the random stream of one shot: a master seed plus the shot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotSeed {
    pub master: u64,
    pub index: u64,
}

impl ShotSeed {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

/// Signal and idler amplitudes of one stochastic realisation.
#[derive(Debug, Clone)]
pub struct ShotState {
    pub signal: Vec<C64>,
    pub idler: Vec<C64>,
    pub seed: ShotSeed,
}

/// Draw independent vacuum noise for both beams in the position domain.
pub fn sample_vacuum(grid: &Grid, seed: ShotSeed) -> ShotState {
    let mut rng = seed.rng();
    let normal = Normal::new(0.0, 0.5).expect("valid normal");
    let mut draw = |n: usize| -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    };
    let signal = draw(grid.len());
    let idler = draw(grid.len());
    ShotState { signal, idler, seed }
}

/// Pump amplitude on the lattice, `(2 pi)^{3/2} A_p exp(-x^2/w0^2 - t^2/tau0^2)`,
/// and the corresponding dimensionless coupling.
#[derive(Debug, Clone)]
pub struct PumpField {
    pub values: Vec<C64>,
}

impl PumpField {
    pub fn new(cfg: &Config, grid: &Grid, x_coh: f64, tau_coh: f64) -> Self {
        let p = &cfg.pump;
        let norm = (2.0 * PI).powf(1.5) * p.amplitude;
        let w = p.waist / x_coh;
        let tau = p.duration / tau_coh;
        let mut values = vec![C64::default(); grid.len()];
        for it in 0..grid.nt {
            let ft = if p.cw { 1.0 } else { (-(grid.t(it) / tau).powi(2)).exp() };
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let fx = if p.plane_wave {
                        1.0
                    } else {
                        let r2 = grid.x(ix).powi(2) + if grid.ny > 1 { grid.y(iy).powi(2) } else { 0.0 };
                        (-r2 / (w * w)).exp()
                    };
                    values[grid.index(it, iy, ix)] = C64::new(norm * ft * fx, 0.0);
                }
            }
        }
        Self { values }
    }

    /// Coupling per unit crystal length. The lattice amplitude carries the
    /// `(2 pi)^{3/2}` of the transform convention, which the coupling removes
    /// so that a flat pump gives exactly `gain`.
    pub fn coupling(&self, gain: f64) -> Vec<C64> {
        let s = gain / (2.0 * PI).powf(1.5);
        self.values.iter().map(|v| v * s).collect()
    }
}

/// Linear dispersion of the pump used when it is propagated.
#[derive(Debug, Clone, Copy)]
struct PumpDispersion {
    group: f64,
    gvd: f64,
    walkoff: f64,
    diffraction: f64,
}

/// Longitudinal sub-step lengths (in crystal lengths) of an integrator.
pub fn substeps(integrator: Integrator, nz: usize) -> Vec<f64> {
    let h = 1.0 / nz as f64;
    match integrator {
        Integrator::Strang => vec![h; nz],
        Integrator::Yoshida4 => {
            let c = 2f64.powf(1.0 / 3.0);
            let w1 = 1.0 / (2.0 - c);
            let w0 = -c / (2.0 - c);
            (0..nz).flat_map(|_| [w1 * h, w0 * h, w1 * h]).collect()
        }
    }
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

/// Split-step integrator for the coupled signal/idler equations.
pub struct Propagator {
    grid: Grid,
    fft: Spectral,
    steps: Vec<f64>,
    /// Linear phase per gap length, per beam, with FFT normalisation folded in.
    gaps: HashMap<u64, [Vec<C64>; 2]>,
    /// Final gap includes the unitary normalisation and the frame rotation back.
    last_gap: [Vec<C64>; 2],
    /// Coupling tables `(cosh(|g| h), e^{i arg g} sinh(|g| h))` per step length,
    /// for a frozen pump.
    rotations: HashMap<u64, (Vec<f64>, Vec<C64>)>,
    coupling: Vec<C64>,
    pump_motion: Option<(Vec<C64>, PumpDispersion)>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("substeps", &self.steps.len())
            .finish()
    }
}

impl Propagator {
    pub fn new(model: &ModeModel, coupling: Vec<C64>, grid: Grid, integrator: Integrator, nz: usize) -> Self {
        let steps = substeps(integrator, nz);
        let fft = Spectral::new(grid);
        let n = grid.len() as f64;
        let phase_table = |len: f64, norm: f64, extra: f64| -> [Vec<C64>; 2] {
            let mut out = [Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len())];
            for kt in 0..grid.nt {
                for ky in 0..grid.ny {
                    for kx in 0..grid.nx {
                        for (b, o) in out.iter_mut().enumerate() {
                            let [qx, qy, om] = grid.beam_bin(b, kt, ky, kx);
                            let d = model.beams[b].delta(qx, qy, om) + 0.5 * model.mismatch;
                            o.push(C64::from_polar(norm, d * len + extra));
                        }
                    }
                }
            }
            out
        };
        let mut gap_lengths = vec![0.5 * steps[0]];
        for w in steps.windows(2) {
            gap_lengths.push(0.5 * (w[0] + w[1]));
        }
        let mut gaps = HashMap::new();
        for &g in &gap_lengths {
            gaps.entry(key(g)).or_insert_with(|| phase_table(g, 1.0 / n, 0.0));
        }
        let last = 0.5 * steps[steps.len() - 1];
        let last_gap = phase_table(last, 1.0 / n.sqrt(), -0.5 * model.mismatch);
        let mut p = Self {
            grid,
            fft,
            steps,
            gaps,
            last_gap,
            rotations: HashMap::new(),
            coupling,
            pump_motion: None,
        };
        p.build_rotations();
        p
    }

    /// Build the propagator described by a configuration.
    pub fn from_config(cfg: &Config, model: &ModeModel, grid: Grid, x_coh: f64, tau_coh: f64, q0: f64, omega0: f64) -> Self {
        let pump = PumpField::new(cfg, &grid, x_coh, tau_coh);
        let coupling = pump.coupling(model.gain);
        let mut p = Self::new(model, coupling, grid, cfg.solver.integrator, cfg.solver.nz);
        if cfg.pump.propagate {
            let c = &cfg.crystal;
            let l = c.length;
            let frame = c.frame_group.unwrap_or(0.5 * (c.group_signal + c.group_idler));
            let n_pump = c.n_pump.unwrap_or(0.5 * (c.n_signal + c.n_idler));
            let k_pump = n_pump * 2.0 * PI / c.pump_wavelength;
            let disp = PumpDispersion {
                group: (c.pump_group.unwrap_or(frame) - frame) * l * omega0,
                gvd: 0.5 * c.pump_gvd * l * omega0 * omega0,
                walkoff: c.pump_walkoff * l * q0,
                diffraction: q0 * q0 * l / (2.0 * k_pump),
            };
            let mut spectrum = p.coupling.clone();
            p.fft.forward(&mut spectrum, Axes::ALL);
            p.pump_motion = Some((spectrum, disp));
            p.rotations.clear();
        }
        p
    }

    fn build_rotations(&mut self) {
        let mut lengths: Vec<f64> = self.steps.clone();
        lengths.dedup();
        for h in lengths {
            if self.rotations.contains_key(&key(h)) {
                continue;
            }
            let table = rotation_table(&self.coupling, h);
            self.rotations.insert(key(h), table);
        }
    }

    fn coupling_at(&self, z: f64) -> Vec<C64> {
        let (spectrum, d) = self.pump_motion.as_ref().expect("moving pump");
        let g = &self.grid;
        let mut buf = spectrum.clone();
        let mut idx = 0;
        for kt in 0..g.nt {
            let om = g.omega_bin(kt);
            for ky in 0..g.ny {
                let qy = g.qy_bin(ky);
                for kx in 0..g.nx {
                    let qx = g.qx_bin(kx);
                    let delta = d.group * om + d.gvd * om * om + d.walkoff * qx - d.diffraction * (qx * qx + qy * qy);
                    buf[idx] *= C64::from_polar(1.0 / g.len() as f64, delta * z);
                    idx += 1;
                }
            }
        }
        self.fft.inverse(&mut buf, Axes::ALL);
        buf
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spectral(&self) -> &Spectral {
        &self.fft
    }

    /// Propagate position-domain amplitudes through the crystal. On return the
    /// buffers hold unitary spectral amplitudes in FFT bin order.
    pub fn propagate(&self, signal: &mut [C64], idler: &mut [C64]) -> Result<()> {
        let fft = &self.fft;
        let mul = |buf: &mut [C64], table: &[C64]| {
            for (v, p) in buf.iter_mut().zip(table) {
                *v *= p;
            }
        };
        fft.forward(signal, Axes::ALL);
        fft.forward(idler, Axes::ALL);
        let first = &self.gaps[&key(0.5 * self.steps[0])];
        mul(signal, &first[0]);
        mul(idler, &first[1]);
        fft.inverse(signal, Axes::ALL);
        fft.inverse(idler, Axes::ALL);
        let mut z = 0.0;
        let count = self.steps.len();
        for (i, &h) in self.steps.iter().enumerate() {
            let moving;
            let (c, s) = if self.pump_motion.is_some() {
                moving = rotation_table(&self.coupling_at(z + 0.5 * h), h);
                (&moving.0, &moving.1)
            } else {
                let t = &self.rotations[&key(h)];
                (&t.0, &t.1)
            };
            for k in 0..signal.len() {
                let a = signal[k];
                let b = idler[k];
                signal[k] = a * c[k] + s[k] * b.conj();
                idler[k] = b * c[k] + s[k] * a.conj();
            }
            z += h;
            fft.forward(signal, Axes::ALL);
            fft.forward(idler, Axes::ALL);
            if i + 1 < count {
                let gap = &self.gaps[&key(0.5 * (h + self.steps[i + 1]))];
                mul(signal, &gap[0]);
                mul(idler, &gap[1]);
                fft.inverse(signal, Axes::ALL);
                fft.inverse(idler, Axes::ALL);
                if i % 64 == 63 && !all_finite(signal) {
                    return Err(Error::Numeric(format!("non-finite field after step {} of {count}", i + 1)));
                }
            } else {
                mul(signal, &self.last_gap[0]);
                mul(idler, &self.last_gap[1]);
            }
        }
        if !all_finite(signal) || !all_finite(idler) {
            return Err(Error::Numeric("non-finite field at the crystal exit".into()));
        }
        Ok(())
    }
}

fn rotation_table(coupling: &[C64], h: f64) -> (Vec<f64>, Vec<C64>) {
    coupling
        .iter()
        .map(|g| {
            let r = g.norm() * h;
            let s = if g.norm() > 0.0 { g / g.norm() * r.sinh() } else { C64::default() };
            (r.cosh(), s)
        })
        .unzip()
}

fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// How the crystal output is computed for each shot.
#[derive(Debug)]
pub enum Crystal {
    SplitStep(Box<Propagator>),
    PlaneWave { table: Box<GainTable>, fft: Spectral },
}

impl Crystal {
    pub fn from_config(cfg: &Config, model: &ModeModel, grid: Grid, scales: &crate::config::DerivedScales) -> Self {
        match cfg.solver.propagation {
            Propagation::SplitStep => Crystal::SplitStep(Box::new(Propagator::from_config(
                cfg,
                model,
                grid,
                scales.x_coh,
                scales.tau_coh,
                scales.q0,
                scales.omega0,
            ))),
            Propagation::PlaneWave => {
                let mut m = *model;
                m.gain *= cfg.pump.amplitude;
                Crystal::PlaneWave { table: Box::new(GainTable::new(&m, &grid)), fft: Spectral::new(grid) }
            }
        }
    }

    pub fn spectral(&self) -> &Spectral {
        match self {
            Crystal::SplitStep(p) => p.spectral(),
            Crystal::PlaneWave { fft, .. } => fft,
        }
    }

    /// Position-domain vacuum in, unitary FFT-order crystal output out.
    pub fn propagate(&self, signal: &mut [C64], idler: &mut [C64]) -> Result<()> {
        match self {
            Crystal::SplitStep(p) => p.propagate(signal, idler),
            Crystal::PlaneWave { table, fft } => {
                let s = 1.0 / (fft.grid().len() as f64).sqrt();
                fft.forward(signal, Axes::ALL);
                fft.forward(idler, Axes::ALL);
                crate::lattice::scale(signal, s);
                crate::lattice::scale(idler, s);
                table.apply(signal, idler);
                Ok(())
            }
        }
    }
}

/// Warn when the idler walks off by more than a quarter of the window.
pub fn walkoff_preflight(model: &ModeModel, grid: &Grid) -> Option<String> {
    let shift = (model.beams[1].walkoff - model.beams[0].walkoff).abs();
    let extent = grid.nx as f64 * grid.dx;
    (shift > extent / 4.0).then(|| {
        format!(
            "walk-off displacement {shift:.2} x_coh exceeds a quarter of the transverse window ({extent:.2} x_coh); \
             periodic wrap-around may affect the result"
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{derive_scales, BeamCoefficients};

    fn grid() -> Grid {
        Grid { nx: 64, ny: 1, nt: 8, dx: 0.5, dy: 1.0, dt: 1.0 }
    }

    fn reference_model() -> ModeModel {
        let c = Config::reference();
        let s = derive_scales(&c.crystal, 0.05).unwrap();
        ModeModel::new(&c.crystal, &s)
    }

    #[test]
    fn vacuum_statistics() {
        let g = Grid { nx: 256, ny: 1, nt: 16, dx: 0.5, dy: 1.0, dt: 1.0 };
        let mut sum = 0.0;
        let mut cross = C64::default();
        let mut count = 0.0;
        for i in 0..20 {
            let s = sample_vacuum(&g, ShotSeed { master: 3, index: i });
            sum += s.signal.iter().chain(&s.idler).map(|c| c.norm_sqr()).sum::<f64>();
            cross += s.signal.iter().zip(&s.idler).map(|(a, b)| a * b).sum::<C64>();
            count += 2.0 * g.len() as f64;
        }
        let mean = sum / count;
        // Standard error of |a|^2 with mean 1/2 is 1/2/sqrt(count).
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / count.sqrt(), "{mean}");
        assert!(cross.norm() / (count / 2.0) < 4.0 * 0.25 / (count / 2.0).sqrt());
    }

    #[test]
    fn seeds_are_independent_and_reproducible() {
        let g = grid();
        let a = sample_vacuum(&g, ShotSeed { master: 1, index: 0 });
        let b = sample_vacuum(&g, ShotSeed { master: 1, index: 1 });
        let c = sample_vacuum(&g, ShotSeed { master: 1, index: 0 });
        assert_eq!(a.signal, c.signal);
        assert_ne!(a.signal, b.signal);
        let corr: C64 = a.signal.iter().zip(&b.signal).map(|(x, y)| x * y.conj()).sum();
        assert!(corr.norm() / g.len() as f64 <= 4.0 * 0.5 / (g.len() as f64).sqrt());
    }

    #[test]
    fn zero_gain_is_linear_propagation() {
        let g = grid();
        let m = reference_model();
        let p = Propagator::new(&m, vec![C64::default(); g.len()], g, Integrator::Strang, 50);
        let shot = sample_vacuum(&g, ShotSeed { master: 5, index: 0 });
        let (mut s, mut i) = (shot.signal.clone(), shot.idler.clone());
        p.propagate(&mut s, &mut i).unwrap();
        let mut expected = shot.signal.clone();
        let fft = Spectral::new(g);
        fft.forward(&mut expected, Axes::ALL);
        let norm = 1.0 / (g.len() as f64).sqrt();
        let mut idx = 0;
        for kt in 0..g.nt {
            for ky in 0..g.ny {
                for kx in 0..g.nx {
                    let d = m.beams[0].delta(g.qx_bin(kx), g.qy_bin(ky), g.omega_bin(kt));
                    expected[idx] *= C64::from_polar(norm, d);
                    idx += 1;
                }
            }
        }
        let err = s.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    /// Worst relative error of the split-step output against the exact
    /// transfer over the modes inside the gain band.
    fn mode_error(model: &ModeModel, integrator: Integrator, nz: usize) -> f64 {
        let g = Grid { nx: 32, ny: 1, nt: 4, dx: 0.25, dy: 1.0, dt: 1.5 };
        let coupling = vec![C64::new(model.gain, 0.0); g.len()];
        let p = Propagator::new(model, coupling, g, integrator, nz);
        let table = GainTable::new(model, &g);
        let mut worst: f64 = 0.0;
        // Excite every spectral bin of the signal with a unit amplitude and compare.
        let fft = Spectral::new(g);
        for bin in 0..g.len() {
            let kx = bin % g.nx;
            let kt = bin / (g.nx * g.ny);
            let total = model.mismatch_total(0, g.qx_bin(kx), 0.0, g.omega_bin(kt));
            if model.gain * model.gain - 0.25 * total * total <= 0.0 {
                continue;
            }
            let mut s = vec![C64::default(); g.len()];
            s[bin] = C64::new((g.len() as f64).sqrt(), 0.0);
            fft.inverse(&mut s, Axes::ALL);
            crate::lattice::scale(&mut s, 1.0 / g.len() as f64);
            let mut i = vec![C64::default(); g.len()];
            p.propagate(&mut s, &mut i).unwrap();
            let u = table.u[0][bin];
            let v = table.v[1][table.partner(bin)];
            let scale = u.norm();
            worst = worst.max((s[bin] - u).norm() / scale);
            worst = worst.max((i[table.partner(bin)] - v).norm() / scale);
        }
        worst
    }

    #[test]
    fn split_step_converges_to_exact_transfer() {
        let m = reference_model();
        let e200 = mode_error(&m, Integrator::Strang, 200);
        let e400 = mode_error(&m, Integrator::Strang, 400);
        let ratio = e200 / e400;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
        assert!(e200 < 1e-3, "{e200}");
        let y200 = mode_error(&m, Integrator::Yoshida4, 200);
        assert!(y200 < 1e-6, "yoshida {y200}");
    }

    #[test]
    fn unit_gain_flat_pump_matches_plane_wave_table() {
        let zero = BeamCoefficients { group: 0.0, gvd: 0.0, walkoff: 0.0, diffraction: 0.0 };
        let m = ModeModel { gain: 2.0, mismatch: 0.0, beams: [zero, zero] };
        // With no dispersion the splitting is exact.
        let e = mode_error(&m, Integrator::Strang, 7);
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn pump_peak_and_coupling() {
        let cfg = Config::reference();
        let g = grid();
        let p = PumpField::new(&cfg, &g, 16.586e-6, 0.9613e-12);
        let peak = p.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(peak <= (2.0 * PI).powf(1.5) + 1e-9);
        let mut flat = cfg.clone();
        flat.pump.plane_wave = true;
        flat.pump.cw = true;
        let p = PumpField::new(&flat, &g, 16.586e-6, 0.9613e-12);
        assert!(p.values.iter().all(|v| (v.re - (2.0 * PI).powf(1.5)).abs() < 1e-12));
        assert!(p.coupling(4.0).iter().all(|v| (v.re - 4.0).abs() < 1e-12));
    }

    #[test]
    fn walkoff_warning() {
        let m = reference_model();
        let small = Grid { nx: 64, ny: 1, nt: 1, dx: 0.26, dy: 1.0, dt: 1.0 };
        assert!(walkoff_preflight(&m, &small).is_some());
        let big = Grid { nx: 512, ny: 1, nt: 1, dx: 0.2256, dy: 1.0, dt: 1.0 };
        assert!(walkoff_preflight(&m, &big).is_none());
    }
}
