//! Local oscillators and balanced homodyne quadratures.
//!
//! A detector pixel at `x` records
//! `Z(x) = sum_t dt 2 |alpha(x, t)| Re[c(x, t) exp(-i phi(x))]`
//! over the whole simulated window. The LO factorises into a spatial modulus
//! and phase law `psi + tilt x + curvature |x|^2` and a real temporal envelope.

use crate::config::{LoConfig, LoProfile, LoTemporal};
use crate::error::{config_err, Error, Result};
use crate::gain::PhaseExpansion;
use crate::lattice::{Domain, FieldLattice, Grid, Plane, C64};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemporalProfile {
    Cw,
    /// `exp(-((t - delay) / duration)^2)`, times in `tau_coh`.
    Gaussian { duration: f64, delay: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOscillator {
    pub beam: usize,
    pub plane: Plane,
    pub nx: usize,
    pub ny: usize,
    /// Spatial modulus, row-major `[y][x]`.
    pub modulus: Vec<f64>,
    pub psi: f64,
    /// Phase gradient along x (rad per plane unit).
    pub tilt: f64,
    /// Quadratic phase (rad per plane unit squared).
    pub curvature: f64,
    pub temporal: TemporalProfile,
}

impl LocalOscillator {
    pub fn plane_wave(beam: usize, plane: Plane, nx: usize, ny: usize) -> Self {
        Self {
            beam,
            plane,
            nx,
            ny,
            modulus: vec![1.0; nx * ny],
            psi: 0.0,
            tilt: 0.0,
            curvature: 0.0,
            temporal: TemporalProfile::Cw,
        }
    }

    /// Build from config. `default_delay` is used when the config leaves the
    /// delay open; `pump_duration` (in `tau_coh`) when it leaves the duration open.
    pub fn from_config(
        cfg: &LoConfig,
        beam: usize,
        plane: Plane,
        grid: &Grid,
        pump_duration: f64,
        default_delay: f64,
    ) -> Result<Self> {
        if !(cfg.amplitude.is_finite() && cfg.amplitude >= 0.0) {
            return config_err("LO amplitude must be non-negative");
        }
        let (nx, ny) = (grid.nx, grid.ny);
        let mut lo = Self::plane_wave(beam, plane, nx, ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let m = match cfg.profile {
                    LoProfile::Plane => cfg.amplitude,
                    LoProfile::Gaussian => {
                        if !(cfg.waist > 0.0) {
                            return config_err("Gaussian LO needs a positive waist");
                        }
                        let x = plane.coord(ix, nx, 0) - cfg.center;
                        let y = if ny > 1 { plane.coord(iy, ny, 1) } else { 0.0 };
                        cfg.amplitude * (-(x * x + y * y) / (cfg.waist * cfg.waist)).exp()
                    }
                };
                lo.modulus[iy * nx + ix] = m;
            }
        }
        lo.psi = cfg.psi;
        lo.tilt = cfg.tilt;
        lo.temporal = match cfg.temporal {
            LoTemporal::Cw => TemporalProfile::Cw,
            LoTemporal::Pulsed => {
                let duration = cfg.duration.unwrap_or(pump_duration);
                if !(duration > 0.0) {
                    return config_err("pulsed LO needs a positive duration");
                }
                TemporalProfile::Gaussian { duration, delay: cfg.delay.unwrap_or(default_delay) }
            }
        };
        Ok(lo)
    }

    #[inline]
    pub fn phase_at(&self, ix: usize, iy: usize) -> f64 {
        let x = self.plane.coord(ix, self.nx, 0);
        let y = if self.ny > 1 { self.plane.coord(iy, self.ny, 1) } else { 0.0 };
        self.psi + self.tilt * x + self.curvature * (x * x + y * y)
    }

    /// Phase law evaluated at an arbitrary coordinate along x (y = 0).
    pub fn phase_x(&self, x: f64) -> f64 {
        self.psi + self.tilt * x + self.curvature * x * x
    }

    /// Temporal envelope on the time samples of `grid`.
    pub fn envelope(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.nt)
            .map(|it| match self.temporal {
                TemporalProfile::Cw => 1.0,
                TemporalProfile::Gaussian { duration, delay } => (-((grid.t(it) - delay) / duration).powi(2)).exp(),
            })
            .collect()
    }

    /// Weights `W_k` with `sum_t dt env(t) c(t) = sum_k W_k C_k` for a unitary
    /// spectrum `C_k` in FFT order.
    pub fn spectral_weights(&self, grid: &Grid) -> Vec<C64> {
        let env = self.envelope(grid);
        let n = grid.nt as f64;
        (0..grid.nt)
            .map(|k| {
                env.iter()
                    .enumerate()
                    .map(|(it, e)| C64::from_polar(*e, 2.0 * PI * (k * it) as f64 / n))
                    .sum::<C64>()
                    * (grid.dt / n.sqrt())
            })
            .collect()
    }

    /// Same LO shifted to the orthogonal quadrature.
    pub fn quadrature(&self, shift: f64) -> Self {
        Self { psi: self.psi + shift, ..self.clone() }
    }
}

/// Time-integrated quadrature map of one shot at one detection plane.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMap {
    pub nx: usize,
    pub ny: usize,
    pub plane: Plane,
    pub values: Vec<f64>,
}

/// `sum_t dt env(t) c(x, t)`: the field demodulated by the LO envelope.
pub fn demodulate(field: &FieldLattice, lo: &LocalOscillator) -> Result<Vec<C64>> {
    let g = field.grid;
    if field.domain != Domain::Position {
        return Err(Error::Numeric("quadratures are measured on position-domain fields".into()));
    }
    if lo.nx != g.nx || lo.ny != g.ny || lo.plane.kind != field.plane.kind {
        return Err(Error::Numeric("LO does not match the detection plane".into()));
    }
    let env = lo.envelope(&g);
    let plane = g.spatial_len();
    let mut acc = vec![C64::default(); plane];
    for (slice, e) in field.data.chunks_exact(plane).zip(&env) {
        let w = e * g.dt;
        for (a, c) in acc.iter_mut().zip(slice) {
            *a += c * w;
        }
    }
    Ok(acc)
}

fn project(demod: &[C64], lo: &LocalOscillator, shift: f64) -> Vec<f64> {
    let mut out = vec![0.0; demod.len()];
    for iy in 0..lo.ny {
        for ix in 0..lo.nx {
            let i = iy * lo.nx + ix;
            let rot = C64::from_polar(1.0, -(lo.phase_at(ix, iy) + shift));
            out[i] = 2.0 * lo.modulus[i] * (demod[i] * rot).re;
        }
    }
    out
}

pub fn measure_quadrature(field: &FieldLattice, lo: &LocalOscillator) -> Result<QuadratureMap> {
    let d = demodulate(field, lo)?;
    Ok(QuadratureMap { nx: lo.nx, ny: lo.ny, plane: field.plane, values: project(&d, lo, 0.0) })
}

/// In-phase and quadrature (`psi + pi/2`) maps from one demodulation.
pub fn measure_pair(field: &FieldLattice, lo: &LocalOscillator) -> Result<[QuadratureMap; 2]> {
    let d = demodulate(field, lo)?;
    let make = |shift| QuadratureMap { nx: lo.nx, ny: lo.ny, plane: field.plane, values: project(&d, lo, shift) };
    Ok([make(0.0), make(FRAC_PI_2)])
}

/// Affine idler phase law `psi + tilt x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLaw {
    pub psi: f64,
    pub tilt: f64,
}

/// Inputs shared by the idler phase recipes.
#[derive(Debug, Clone, Copy)]
pub struct RecipeInputs<'a> {
    pub expansion: &'a PhaseExpansion,
    /// Exact correlation phase at the gain centre (signal at `-q_C`, `omega = 0`).
    pub center_phase: f64,
    pub optimized: bool,
    /// Whether the idler path includes the focal-plane shift.
    pub focal_shift: bool,
}

impl RecipeInputs<'_> {
    fn base(&self) -> Result<f64> {
        if self.optimized && !self.focal_shift {
            return config_err("optimised LO phases need the focal-plane shift in the idler path");
        }
        Ok(if self.optimized { self.expansion.constant } else { self.center_phase })
    }
}

/// Idler LO for the far-field point-like geometry; `signal_phase` is the
/// signal LO phase at the fixed pixel.
pub fn lo_phase_farfield(r: &RecipeInputs, signal_phase: f64) -> Result<PhaseLaw> {
    let base = r.base()?;
    let tilt = if r.optimized { -r.expansion.linear_q } else { 0.0 };
    Ok(PhaseLaw { psi: base - signal_phase + PI, tilt })
}

/// Idler LO for the telescope geometry with the signal pixel at far-field
/// coordinate `x1` (in `q0` units).
pub fn lo_phase_nearfield(r: &RecipeInputs, x1: f64, signal_phase: f64) -> Result<PhaseLaw> {
    let base = r.base()?;
    let linear = if r.optimized { x1 * r.expansion.linear_q } else { 0.0 };
    Ok(PhaseLaw { psi: base - signal_phase + linear - FRAC_PI_2, tilt: -x1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketVariant {
    /// Idler behind an f-f lens: the object itself is retrieved.
    Near,
    /// Idler behind a telescope: the object spectrum is retrieved.
    Far,
}

/// Idler LO for the bucket geometries. The signal LO must be affine
/// (`psi1 + tilt1 x`); `object_center` is the far-field coordinate of the
/// object centre, used by the optimised far variant to remove the carrier it
/// imprints on the reconstructed spectrum.
pub fn lo_phase_bucket(
    r: &RecipeInputs,
    variant: BucketVariant,
    signal: PhaseLaw,
    object_center: f64,
) -> Result<PhaseLaw> {
    let base = r.base()?;
    let lin = r.expansion.linear_q;
    Ok(match variant {
        // The idler at x2 pairs with the signal at -x2, so the signal law
        // enters mirrored.
        BucketVariant::Near => PhaseLaw {
            psi: base - signal.psi + PI,
            tilt: signal.tilt - if r.optimized { lin } else { 0.0 },
        },
        BucketVariant::Far => {
            if r.optimized {
                PhaseLaw {
                    psi: base + (lin - signal.tilt) * object_center - signal.psi - FRAC_PI_2,
                    tilt: -object_center,
                }
            } else {
                PhaseLaw { psi: base - signal.psi - FRAC_PI_2, tilt: 0.0 }
            }
        }
    })
}

/// Relative delay of the idler LO with respect to the signal LO that removes
/// the linear spectral gain phase (in `tau_coh`). Equals the linear spectral
/// coefficient of the gain phase; the idler LO is delayed by minus this value.
pub fn lo_temporal_delay(expansion: &PhaseExpansion) -> f64 {
    expansion.linear_omega
}
