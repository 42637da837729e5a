//! Plane-wave-pump transfer functions of the parametric amplifier.
//!
//! Everything here is dimensionless: `q` in units of `q0`, `omega` in units
//! of `omega0`, and the crystal has unit length. Beam index 0 is the signal,
//! 1 the idler.

use crate::config::{gain_slope, CrystalConfig, ModeModel};
use crate::lattice::{Grid, C64};
use std::f64::consts::PI;

/// Linear phase mismatch of one beam in physical units (1/m), laboratory
/// frame: `k' omega + k'' omega^2 / 2 + rho q_x - |q|^2 / (2k)`.
pub fn delta_physical(crystal: &CrystalConfig, beam: usize, q: [f64; 2], omega: f64) -> f64 {
    let (group, gvd, walkoff, k) = match beam {
        0 => (crystal.group_signal, crystal.gvd_signal, crystal.walkoff_signal, crystal.k_signal()),
        _ => (crystal.group_idler, crystal.gvd_idler, crystal.walkoff_idler, crystal.k_idler()),
    };
    group * omega + 0.5 * gvd * omega * omega + walkoff * q[0] - (q[0] * q[0] + q[1] * q[1]) / (2.0 * k)
}

/// `cosh(sqrt(x))` and `sinh(sqrt(x))/sqrt(x)` as entire functions of `x`,
/// continued to `cos`/`sin` for negative `x`.
pub fn cosh_sinhc(x: f64) -> (f64, f64) {
    if x.abs() < 1e-3 {
        // Taylor series; the next omitted term is below 1e-18 relative.
        let c = 1.0 + x / 2.0 * (1.0 + x / 12.0 * (1.0 + x / 30.0 * (1.0 + x / 56.0)));
        let s = 1.0 + x / 6.0 * (1.0 + x / 20.0 * (1.0 + x / 42.0 * (1.0 + x / 72.0)));
        (c, s)
    } else if x > 0.0 {
        let r = x.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-x).sqrt();
        (r.cos(), r.sin() / r)
    }
}

impl ModeModel {
    /// Dispersion of the signal and idler members of the pair, ordered by
    /// beam so that a mode and its partner evaluate identical expressions.
    #[inline]
    fn pair_deltas(&self, beam: usize, qx: f64, qy: f64, omega: f64) -> [f64; 2] {
        let own = self.beams[beam].delta(qx, qy, omega);
        let other = self.beams[1 - beam].delta(-qx, -qy, -omega);
        if beam == 0 {
            [own, other]
        } else {
            [other, own]
        }
    }

    /// Total mismatch seen by a mode of `beam` at `(q, omega)` and its
    /// conjugate partner of the other beam at `(-q, -omega)`.
    #[inline]
    pub fn mismatch_total(&self, beam: usize, qx: f64, qy: f64, omega: f64) -> f64 {
        let [s, i] = self.pair_deltas(beam, qx, qy, omega);
        self.mismatch + (s + i)
    }

    /// Difference mismatch entering the common phase of the transfer functions.
    #[inline]
    pub fn mismatch_difference(&self, beam: usize, qx: f64, qy: f64, omega: f64) -> f64 {
        let [s, i] = self.pair_deltas(beam, qx, qy, omega);
        let d = if beam == 0 { s - i } else { i - s };
        d - self.mismatch
    }

    /// Transfer functions `(U, V)` of `beam`: the output amplitude is
    /// `U a(q, omega) + V a_other^*(-q, -omega)`.
    pub fn transfer(&self, beam: usize, qx: f64, qy: f64, omega: f64) -> (C64, C64) {
        let total = self.mismatch_total(beam, qx, qy, omega);
        let [s, i] = self.pair_deltas(beam, qx, qy, omega);
        let d = if beam == 0 { s - i } else { i - s };
        let g2 = self.gain * self.gain - 0.25 * total * total;
        let (c, sc) = cosh_sinhc(g2);
        // Partner phases are exact negatives, so U_s V_i = U_i V_s to rounding.
        let common = C64::from_polar(1.0, 0.5 * d) * C64::from_polar(1.0, -0.5 * self.mismatch);
        let u = common * C64::new(c, 0.5 * total * sc);
        let v = common * (self.gain * sc);
        (u, v)
    }

    /// Signal-idler correlation function `U_s(q, omega) V_i(-q, -omega)`.
    pub fn correlation(&self, qx: f64, qy: f64, omega: f64) -> C64 {
        // The difference phases of the two factors cancel up to the mismatch,
        // so the product reduces to this closed form.
        let total = self.mismatch_total(0, qx, qy, omega);
        let g2 = self.gain * self.gain - 0.25 * total * total;
        let (c, s) = cosh_sinhc(g2);
        C64::from_polar(self.gain * s, -self.mismatch) * C64::new(c, 0.5 * total * s)
    }

    /// Exact phase of the correlation function (not unwrapped).
    pub fn correlation_phase(&self, qx: f64, qy: f64, omega: f64) -> f64 {
        self.correlation(qx, qy, omega).arg()
    }
}

/// Coefficients of the second-order expansion of the correlation phase
/// about `q = 0, omega = 0`:
/// `constant + linear_q * q_x + quadratic_q * |q|^2 + linear_omega * omega + quadratic_omega * omega^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseExpansion {
    pub constant: f64,
    pub linear_q: f64,
    pub quadratic_q: f64,
    pub linear_omega: f64,
    pub quadratic_omega: f64,
    /// `tanh(g)/(2g)`.
    pub slope: f64,
}

/// High-gain expansion: the phase is `-mismatch + slope * total_mismatch`.
pub fn phase_expansion(model: &ModeModel) -> PhaseExpansion {
    let slope = gain_slope(model.gain);
    let [s, i] = model.beams;
    PhaseExpansion {
        constant: model.mismatch * (slope - 1.0),
        linear_q: slope * (s.walkoff - i.walkoff),
        quadratic_q: -slope * (s.diffraction + i.diffraction),
        linear_omega: slope * (s.group - i.group),
        quadratic_omega: slope * (s.gvd + i.gvd),
        slope,
    }
}

impl PhaseExpansion {
    pub fn eval(&self, qx: f64, qy: f64, omega: f64) -> f64 {
        self.constant
            + self.linear_q * qx
            + self.quadratic_q * (qx * qx + qy * qy)
            + self.linear_omega * omega
            + self.quadratic_omega * omega * omega
    }
}

/// Size of the residual second-order spectral phase relative to the
/// first-order one: `(k1'' + k2'') / ((k2' - k1')^2 l)`.
pub fn spectral_phase_ratio(crystal: &CrystalConfig) -> f64 {
    let dk = crystal.group_idler - crystal.group_signal;
    (crystal.gvd_signal + crystal.gvd_idler) / (dk * dk * crystal.length)
}

/// Unwrap a phase sequence starting from `seed`, walking outwards.
pub fn unwrap_from(phase: &[f64], seed: usize) -> Vec<f64> {
    let mut out = phase.to_vec();
    if phase.is_empty() {
        return out;
    }
    let fix = |prev: f64, cur: f64| cur - 2.0 * PI * ((cur - prev) / (2.0 * PI)).round();
    for i in seed + 1..phase.len() {
        out[i] = fix(out[i - 1], phase[i]);
    }
    for i in (0..seed).rev() {
        out[i] = fix(out[i + 1], phase[i]);
    }
    out
}

/// Transfer and correlation functions tabulated on the lattice in FFT bin order.
#[derive(Debug, Clone)]
pub struct GainTable {
    pub grid: Grid,
    pub u: [Vec<C64>; 2],
    pub v: [Vec<C64>; 2],
    pub g: Vec<C64>,
}

impl GainTable {
    pub fn new(model: &ModeModel, grid: &Grid) -> Self {
        let n = grid.len();
        let mut u = [vec![C64::default(); n], vec![C64::default(); n]];
        let mut v = [vec![C64::default(); n], vec![C64::default(); n]];
        let mut g = vec![C64::default(); n];
        for kt in 0..grid.nt {
            let om = grid.omega_bin(kt);
            for ky in 0..grid.ny {
                let qy = grid.qy_bin(ky);
                for kx in 0..grid.nx {
                    let qx = grid.qx_bin(kx);
                    let idx = grid.index(kt, ky, kx);
                    for (beam, (ub, vb)) in u.iter_mut().zip(v.iter_mut()).enumerate() {
                        let [bx, by, bo] = grid.beam_bin(beam, kt, ky, kx);
                        let (a, b) = model.transfer(beam, bx, by, bo);
                        ub[idx] = a;
                        vb[idx] = b;
                    }
                    g[idx] = model.correlation(qx, qy, om);
                }
            }
        }
        Self { grid: *grid, u, v, g }
    }

    /// Index of the mode at `(-q, -omega)`.
    #[inline]
    pub fn partner(&self, idx: usize) -> usize {
        let g = &self.grid;
        let kx = idx % g.nx;
        let ky = (idx / g.nx) % g.ny;
        let kt = idx / (g.nx * g.ny);
        g.index(Grid::mirror(kt, g.nt), Grid::mirror(ky, g.ny), Grid::mirror(kx, g.nx))
    }

    /// Apply the plane-wave transfer to spectral amplitudes (FFT bin order,
    /// any consistent normalisation).
    pub fn apply(&self, signal: &mut [C64], idler: &mut [C64]) {
        let s_in = signal.to_vec();
        let i_in = idler.to_vec();
        for idx in 0..s_in.len() {
            let p = self.partner(idx);
            signal[idx] = self.u[0][idx] * s_in[idx] + self.v[0][idx] * i_in[p].conj();
            idler[idx] = self.u[1][idx] * i_in[idx] + self.v[1][idx] * s_in[p].conj();
        }
    }
}

/// Correlation function along `q_x` (with `q_y = 0`, `omega = 0`) and its
/// phase unwrapped outwards from the gain centre.
pub fn correlation_scan(model: &ModeModel, q: &[f64], center: f64) -> (Vec<C64>, Vec<f64>) {
    let g: Vec<C64> = q.iter().map(|&qx| model.correlation(qx, 0.0, 0.0)).collect();
    let seed = q
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let phase: Vec<f64> = g.iter().map(|c| c.arg()).collect();
    let unwrapped = unwrap_from(&phase, seed);
    (g, unwrapped)
}
