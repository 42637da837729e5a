//! Semi-analytic expectation values of the signal-idler quadrature
//! correlation for the plane-wave-pump amplifier.
//!
//! Every curve is returned as a complex lattice `P` whose real part is the
//! correlation with the idler LO as configured and whose imaginary part is
//! the correlation with the idler LO advanced by a quarter period.
//!
//! Two integration modes exist. `Lattice` reproduces the expectation of the
//! simulated estimator exactly: sums run over the FFT bins and the object
//! spectrum is the lattice transform of the pixelated mask. `Continuum`
//! treats the object as piecewise constant over its cells and replaces the
//! bin sums by trapezoid integrals refined until they settle.

use crate::config::{ConvolutionMode, Geometry, ModeModel};
use crate::correlator::Quadrature;
use crate::error::{config_err, Error, Result};
use crate::gain::PhaseExpansion;
use crate::homodyne::LocalOscillator;
use crate::lattice::{Grid, Plane, PlaneKind, C64};
use crate::optics::{sinc, ObjectMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    Lattice,
    Continuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalMode {
    /// Both LOs continuous over the detection window: only `omega = 0` survives.
    Cw,
    /// Use the temporal envelopes of the configured LOs.
    Pulsed,
}

/// Spectral overlap of the two LO envelopes, as weights on the time bins.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalFactor {
    pub mode: TemporalMode,
    /// `(omega, W_signal(omega) W_idler(-omega))` per bin with non-negligible weight.
    pub terms: Vec<(f64, C64)>,
}

impl TemporalFactor {
    /// Weighted correlation `sum_omega W1 W2 G(q, omega)` at signal wave vector `q`.
    pub fn eval(&self, model: &ModeModel, q: f64) -> C64 {
        self.terms.iter().map(|(om, w)| w * model.correlation(q, 0.0, *om)).sum()
    }

    pub fn total_weight(&self) -> C64 {
        self.terms.iter().map(|(_, w)| w).sum()
    }
}

/// Temporal factor for a detection window of `grid.nt * grid.dt` coherence times.
pub fn temporal_factor(
    mode: TemporalMode,
    signal: &LocalOscillator,
    idler: &LocalOscillator,
    grid: &Grid,
) -> Result<TemporalFactor> {
    let window = grid.nt as f64 * grid.dt;
    if window <= 1.0 {
        return config_err(format!(
            "detection window of {window} coherence times is too short; the correlation needs a window longer than the coherence time"
        ));
    }
    let terms = match mode {
        TemporalMode::Cw => vec![(0.0, C64::new(grid.dt * window, 0.0))],
        TemporalMode::Pulsed => {
            let w1 = signal.spectral_weights(grid);
            let w2 = idler.spectral_weights(grid);
            let peak = w1.iter().chain(&w2).map(|w| w.norm()).fold(0.0, f64::max);
            (0..grid.nt)
                .map(|k| (grid.omega_bin(k), w1[k] * w2[Grid::mirror(k, grid.nt)]))
                .filter(|(_, w)| w.norm() > 1e-300 && w.norm() > 1e-16 * peak * peak)
                .collect()
        }
    };
    Ok(TemporalFactor { mode, terms })
}

/// Replace the gain function by a constant modulus with the phase of its
/// second-order expansion about `center` (a signal wave vector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub center: f64,
    pub expansion: PhaseExpansion,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleSetup<'a> {
    pub model: &'a ModeModel,
    /// Simulation lattice; near pitch `dx`, far pitch `2 pi / (nx dx)`.
    pub grid: Grid,
    /// Coefficient `c` of the idler focal-shift phase `exp(i c q^2)`.
    pub focal_coefficient: f64,
    pub temporal: &'a TemporalFactor,
    pub signal_lo: &'a LocalOscillator,
    pub idler_lo: &'a LocalOscillator,
    pub integration: Integration,
    pub plateau: Option<Plateau>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMeta {
    pub formula: &'static str,
    pub integration: Integration,
    pub temporal: TemporalMode,
    pub plateau: bool,
    pub focal_shift: bool,
    pub tilt: bool,
    /// Whether the quadrature refinement met its tolerance (always true on the lattice).
    pub converged: bool,
    pub refinements: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCurve {
    pub geometry: Geometry,
    pub plane: Plane,
    pub nx: usize,
    pub values: Vec<C64>,
    pub meta: OracleMeta,
}

impl OracleCurve {
    pub fn quadrature(&self, q: Quadrature) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| match q {
                Quadrature::Real => v.re,
                Quadrature::Imag => v.im,
            })
            .collect()
    }

    /// Coordinates of the scan points in plane units.
    pub fn coords(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.plane.coord(i, self.nx, 0)).collect()
    }

    /// Multiply pointwise by a real profile of the scan coordinate.
    pub fn weighted(mut self, w: impl Fn(f64) -> f64) -> Self {
        for (i, v) in self.values.iter_mut().enumerate() {
            *v *= w(self.plane.coord(i, self.nx, 0));
        }
        self
    }
}

/// Gaussian profile `exp(-(x - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWeight {
    pub center: f64,
    pub sigma: f64,
}

impl GaussianWeight {
    pub fn eval(&self, x: f64) -> f64 {
        (-(x - self.center).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Moment fit of a Gaussian to a non-negative profile after removing its
/// minimum as background.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Result<GaussianWeight> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Numeric("Gaussian fit needs matching coordinate and value arrays".into()));
    }
    let floor = y.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = y.iter().map(|v| v - floor).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numeric("Gaussian fit of a flat profile".into()));
    }
    let center = x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = x.iter().zip(&w).map(|(x, w)| (x - center).powi(2) * w).sum::<f64>() / total;
    if !(var > 0.0) {
        return Err(Error::Numeric("Gaussian fit produced zero width".into()));
    }
    Ok(GaussianWeight { center, sigma: var.sqrt() })
}

const REFINE_TOL: f64 = 1e-8;
const MAX_REFINE: u32 = 8;

impl OracleSetup<'_> {
    fn check(&self, object_plane: PlaneKind, mask: &ObjectMask, idler_plane: PlaneKind) -> Result<()> {
        let g = &self.grid;
        if g.ny != 1 {
            return config_err("oracle curves are one-dimensional; use ny = 1");
        }
        if mask.nx != g.nx || mask.plane != object_plane {
            return config_err("object mask does not match the oracle geometry");
        }
        if self.signal_lo.plane.kind != PlaneKind::Far || self.signal_lo.nx != g.nx {
            return config_err("the signal LO must sit in the far field of the oracle grid");
        }
        if self.idler_lo.plane.kind != idler_plane || self.idler_lo.nx != g.nx {
            return config_err("the idler LO plane does not match the oracle geometry");
        }
        Ok(())
    }

    fn dq(&self) -> f64 {
        self.grid.dqx()
    }

    fn far_q(&self, m: usize) -> f64 {
        self.grid.far_x(m)
    }

    /// Far index of the conjugate partner.
    fn partner(&self, m: usize) -> usize {
        Grid::mirror(m, self.grid.nx)
    }

    /// Sign of the pair correlation in centred coordinates. The Nyquist bin
    /// is its own partner and picks up `exp(-i pi (N - 1)) = -1` from the
    /// half-sample offset of the near-field grid.
    fn pair_sign(&self, m: usize) -> f64 {
        if m == 0 {
            -1.0
        } else {
            1.0
        }
    }

    fn focal(&self, q: f64) -> C64 {
        C64::from_polar(1.0, self.focal_coefficient * q * q)
    }

    /// Temporally weighted gain function at signal wave vector `q`.
    fn gain(&self, q: f64) -> C64 {
        match &self.plateau {
            None => self.temporal.eval(self.model, q),
            Some(p) => {
                let c = self.temporal.eval(self.model, p.center);
                c * C64::from_polar(1.0, p.expansion.eval(q, 0.0, 0.0) - p.expansion.eval(p.center, 0.0, 0.0))
            }
        }
    }

    fn meta(&self, formula: &'static str, converged: bool, refinements: u32) -> OracleMeta {
        OracleMeta {
            formula,
            integration: self.integration,
            temporal: self.temporal.mode,
            plateau: self.plateau.is_some(),
            focal_shift: self.focal_coefficient != 0.0,
            tilt: self.signal_lo.tilt != 0.0 || self.idler_lo.tilt != 0.0,
            converged,
            refinements,
        }
    }

    /// Near-field object spectrum at `q` (q0 units), lattice normalised.
    fn object_spectrum(&self, mask: &ObjectMask, q: f64) -> C64 {
        let qp = q * self.grid.dx;
        let d = mask.spectrum_x(qp);
        match self.integration {
            Integration::Lattice => d,
            Integration::Continuum => d * sinc(0.5 * qp),
        }
    }

    /// Object spectrum at integer multiples `j` of the far pitch, `j in [-N, N]`.
    fn spectrum_table(&self, mask: &ObjectMask) -> Vec<C64> {
        let n = self.grid.nx as i64;
        (-n..=n).map(|j| self.object_spectrum(mask, j as f64 * self.dq())).collect()
    }

    /// Far signal pixel to its LO factor `|alpha| exp(-i phi)`.
    fn signal_factor(&self, m: usize) -> C64 {
        C64::from_polar(self.signal_lo.modulus[m], -self.signal_lo.phase_at(m, 0))
    }

    fn idler_factor(&self, m: usize) -> C64 {
        C64::from_polar(self.idler_lo.modulus[m], -self.idler_lo.phase_at(m, 0))
    }
}

/// Index of integer far offset `j` in a table built by `spectrum_table`.
#[inline]
fn tab(j: i64, n: usize) -> usize {
    (j + n as i64) as usize
}

/// Signed far-grid offset (in pitches) of far index `m`.
#[inline]
fn far_int(m: usize, n: usize) -> i64 {
    m as i64 - (n / 2) as i64
}

/// Integral over `[-Q, Q]`, `Q = N dq / 2`, divided by `dq`. Trapezoid sums
/// with the step halved at each level are combined by Romberg extrapolation
/// until the maximum change is below the tolerance relative to the maximum
/// value. Returns the values, the number of halvings and the convergence flag.
fn refine<F>(n_points: usize, dq: f64, shift: f64, integrand: F) -> (Vec<C64>, u32, bool)
where
    F: Fn(f64, &mut [C64]),
{
    let q_max = 0.5 * n_points as f64 * dq - shift;
    let mut buf = vec![C64::default(); n_points];
    let mut add = |acc: &mut Vec<C64>, q: f64, w: f64| {
        integrand(q, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b * w;
        }
    };
    // Level 0: one sub-interval per far pitch.
    let mut h = dq;
    let mut trap = vec![C64::default(); n_points];
    for j in 0..=n_points {
        let w = if j == 0 || j == n_points { 0.5 * h } else { h };
        add(&mut trap, -q_max + j as f64 * h, w);
    }
    let mut rows: Vec<Vec<Vec<C64>>> = vec![vec![trap.clone()]];
    let mut intervals = n_points;
    for r in 1..=MAX_REFINE {
        // Halve the step: keep half the old sum and add the new midpoints.
        let mut next: Vec<C64> = trap.iter().map(|v| v * 0.5).collect();
        h *= 0.5;
        for j in 0..intervals {
            add(&mut next, -q_max + (2 * j + 1) as f64 * h, h);
        }
        intervals *= 2;
        trap = next;
        let prev_row = rows.last().expect("non-empty").clone();
        let mut row = vec![trap.clone()];
        for k in 1..=r as usize {
            let f = 4f64.powi(k as i32);
            let e: Vec<C64> = row[k - 1]
                .iter()
                .zip(&prev_row[k - 1])
                .map(|(a, b)| (a * f - b) / (f - 1.0))
                .collect();
            row.push(e);
        }
        let best = &row[r as usize];
        let last = &prev_row[r as usize - 1];
        let scale = best.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let change = best.iter().zip(last).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let done = change <= REFINE_TOL * scale.max(f64::MIN_POSITIVE);
        let out: Vec<C64> = best.iter().map(|v| v / dq).collect();
        rows.push(row);
        if done || r == MAX_REFINE {
            return (out, r, done);
        }
    }
    unreachable!("MAX_REFINE is positive")
}

/// Both arms in the far field, signal pixel `m1` fixed, idler scanned.
pub fn pointlike_far(setup: &OracleSetup, mask: &ObjectMask, m1: usize) -> Result<OracleCurve> {
    setup.check(PlaneKind::Near, mask, PlaneKind::Far)?;
    let n = setup.grid.nx;
    if m1 >= n {
        return config_err("signal pixel outside the grid");
    }
    let table = setup.spectrum_table(mask);
    let norm = 1.0 / (n as f64).sqrt();
    let a1 = setup.signal_factor(m1);
    let values = (0..n)
        .map(|m2| {
            let p = setup.partner(m2);
            let d = table[tab(far_int(m1, n) + far_int(m2, n), n)];
            let c = -setup.focal(setup.far_q(m2)) * d * setup.gain(setup.far_q(p)) * norm;
            2.0 * a1 * setup.idler_factor(m2) * c
        })
        .collect();
    Ok(OracleCurve {
        geometry: Geometry::PointlikeFar,
        plane: setup.idler_lo.plane,
        nx: n,
        values,
        meta: setup.meta("far-field point-like", true, 0),
    })
}

/// As [`pointlike_far`] with the idler pixel `m2` fixed and the signal scanned.
pub fn pointlike_far_scan(setup: &OracleSetup, mask: &ObjectMask, m2: usize) -> Result<OracleCurve> {
    setup.check(PlaneKind::Near, mask, PlaneKind::Far)?;
    let n = setup.grid.nx;
    if m2 >= n {
        return config_err("idler pixel outside the grid");
    }
    let table = setup.spectrum_table(mask);
    let norm = 1.0 / (n as f64).sqrt();
    let p = setup.partner(m2);
    let common = -setup.focal(setup.far_q(m2)) * setup.gain(setup.far_q(p)) * norm * setup.idler_factor(m2);
    let values = (0..n)
        .map(|m1| 2.0 * setup.signal_factor(m1) * common * table[tab(far_int(m1, n) + far_int(m2, n), n)])
        .collect();
    Ok(OracleCurve {
        geometry: Geometry::PointlikeFar,
        plane: setup.signal_lo.plane,
        nx: n,
        values,
        meta: setup.meta("far-field point-like, signal scan", true, 0),
    })
}

/// Raw near-field correlation `<c1(q1) a2(x)>` on the near sample points,
/// before the idler LO is applied.
fn telescope_correlation(setup: &OracleSetup, mask: &ObjectMask, m1: usize) -> (Vec<C64>, u32, bool) {
    let g = setup.grid;
    let n = g.nx;
    let xs: Vec<f64> = (0..n).map(|i| g.x(i)).collect();
    match setup.integration {
        Integration::Lattice => {
            let table = setup.spectrum_table(mask);
            let terms: Vec<(f64, C64)> = (0..n)
                .map(|k| {
                    let p = setup.partner(k);
                    let q = setup.far_q(k);
                    let d = table[tab(far_int(m1, n) + far_int(k, n), n)];
                    (q, d * setup.focal(q) * setup.gain(setup.far_q(p)))
                })
                .collect();
            let out = xs
                .iter()
                .map(|x| {
                    let s: C64 = terms.iter().map(|(q, t)| t * C64::from_polar(1.0, q * x)).sum();
                    C64::new(0.0, -1.0) * s / n as f64
                })
                .collect();
            (out, 0, true)
        }
        Integration::Continuum => {
            let q1 = setup.far_q(m1);
            let (vals, r, ok) = refine(n, setup.dq(), 0.0, |q, buf| {
                let t = setup.object_spectrum(mask, q1 + q) * setup.focal(q) * setup.gain(-q);
                for (b, x) in buf.iter_mut().zip(&xs) {
                    *b = t * C64::from_polar(1.0, q * x);
                }
            });
            let out = vals.iter().map(|v| C64::new(0.0, -1.0) * v / n as f64).collect();
            (out, r, ok)
        }
    }
}

/// Signal arm in the far field at pixel `m1`, idler imaged onto the near
/// field by a telescope, or by a single lens when `curvature` is given (the
/// 2f-2f image is parity inverted and carries `exp(i curvature x^2)`).
pub fn pointlike_near(
    setup: &OracleSetup,
    mask: &ObjectMask,
    m1: usize,
    curvature: Option<f64>,
) -> Result<OracleCurve> {
    setup.check(PlaneKind::Near, mask, PlaneKind::Near)?;
    let n = setup.grid.nx;
    if m1 >= n {
        return config_err("signal pixel outside the grid");
    }
    let (raw, r, ok) = telescope_correlation(setup, mask, m1);
    let a1 = setup.signal_factor(m1);
    let values = (0..n)
        .map(|i| {
            let c = match curvature {
                None => raw[i],
                Some(k) => {
                    let x = setup.grid.x(i);
                    raw[n - 1 - i] * C64::from_polar(1.0, k * x * x)
                }
            };
            2.0 * a1 * setup.idler_factor(i) * c
        })
        .collect();
    let (geometry, formula) = match curvature {
        None => (Geometry::PointlikeNear, "telescope near-field point-like"),
        Some(_) => (Geometry::PointlikeNear2f, "2f-2f near-field point-like"),
    };
    Ok(OracleCurve { geometry, plane: setup.idler_lo.plane, nx: n, values, meta: setup.meta(formula, ok, r) })
}

/// Object in the signal far field, bucket signal detector, idler far field.
pub fn bucket_near(setup: &OracleSetup, mask: &ObjectMask) -> Result<OracleCurve> {
    setup.check(PlaneKind::Far, mask, PlaneKind::Far)?;
    let n = setup.grid.nx;
    let area = setup.dq();
    let values = (0..n)
        .map(|m2| {
            let p = setup.partner(m2);
            let c = -setup.pair_sign(m2) * mask.values[p] * setup.focal(setup.far_q(m2)) * setup.gain(setup.far_q(p));
            2.0 * area * setup.signal_factor(p) * setup.idler_factor(m2) * c
        })
        .collect();
    Ok(OracleCurve {
        geometry: Geometry::BucketNear,
        plane: setup.idler_lo.plane,
        nx: n,
        values,
        meta: setup.meta("bucket, idler far field", true, 0),
    })
}

/// Linear interpolation of the LO modulus along x, held constant past the ends.
fn modulus_at(lo: &LocalOscillator, x: f64) -> f64 {
    let n = lo.nx;
    let x0 = lo.plane.coord(0, n, 0);
    let f = ((x - x0) / lo.plane.step[0]).clamp(0.0, (n - 1) as f64);
    let i = (f.floor() as usize).min(n - 2);
    let t = f - i as f64;
    lo.modulus[i] * (1.0 - t) + lo.modulus[i + 1] * t
}

/// Value of a pixelated profile at fractional pixel position `u` (pixel `m`
/// covers `[m - 1/2, m + 1/2]`); the mean of both sides on a boundary.
fn cell_value(values: &[C64], u: f64) -> C64 {
    let n = values.len() as i64;
    let b = u + 0.5;
    let edge = b.round();
    if (b - edge).abs() < 1e-7 {
        let (l, r) = (edge as i64 - 1, edge as i64);
        return match ((0..n).contains(&l), (0..n).contains(&r)) {
            (true, true) => 0.5 * (values[l as usize] + values[r as usize]),
            (true, false) => values[l as usize],
            (false, true) => values[r as usize],
            _ => C64::default(),
        };
    }
    let m = u.round() as i64;
    if (0..n).contains(&m) {
        values[m as usize]
    } else {
        C64::default()
    }
}

/// Object in the signal far field, bucket signal detector, idler near field
/// through a telescope.
pub fn bucket_far(setup: &OracleSetup, mask: &ObjectMask) -> Result<OracleCurve> {
    setup.check(PlaneKind::Far, mask, PlaneKind::Near)?;
    let g = setup.grid;
    let n = g.nx;
    let area = setup.dq();
    let norm = 1.0 / (n as f64).sqrt();
    let xs: Vec<f64> = (0..n).map(|i| g.x(i)).collect();
    let (raw, r, ok) = match setup.integration {
        Integration::Lattice => {
            let terms: Vec<(f64, C64)> = (0..n)
                .map(|m1| {
                    let k = setup.partner(m1);
                    let qk = setup.far_q(k);
                    let t = setup.pair_sign(m1)
                        * setup.signal_factor(m1)
                        * mask.values[m1]
                        * setup.focal(qk)
                        * setup.gain(setup.far_q(m1));
                    (qk, t)
                })
                .collect();
            let out = xs
                .iter()
                .map(|x| terms.iter().map(|(q, t)| t * C64::from_polar(1.0, q * x)).sum::<C64>())
                .collect();
            (out, 0, true)
        }
        Integration::Continuum => {
            let lo = setup.signal_lo;
            // Nodes on pixel boundaries keep the piecewise-constant object
            // smooth inside every refinement interval.
            let dq = setup.dq();
            refine(n, dq, -0.5 * dq, |q1, buf| {
                let t = C64::from_polar(modulus_at(lo, q1), -lo.phase_x(q1))
                    * cell_value(&mask.values[..n], q1 / dq + (n / 2) as f64)
                    * setup.focal(-q1)
                    * setup.gain(q1);
                for (b, x) in buf.iter_mut().zip(&xs) {
                    *b = t * C64::from_polar(1.0, -q1 * x);
                }
            })
        }
    };
    let values = (0..n)
        .map(|i| 2.0 * setup.idler_factor(i) * C64::new(0.0, -1.0) * area * norm * raw[i])
        .collect();
    Ok(OracleCurve {
        geometry: Geometry::BucketFar,
        plane: setup.idler_lo.plane,
        nx: n,
        values,
        meta: setup.meta("bucket, idler near field", ok, r),
    })
}

/// Expectation of the spatial-average estimator: both arms in the far field,
/// object in the near field.
pub fn convolution_expectation(setup: &OracleSetup, mask: &ObjectMask, mode: ConvolutionMode) -> Result<OracleCurve> {
    setup.check(PlaneKind::Near, mask, PlaneKind::Far)?;
    if setup.integration != Integration::Lattice {
        return config_err("the convolution expectation is defined on the lattice only");
    }
    let n = setup.grid.nx;
    let half = (n / 2) as i64;
    let area = setup.dq();
    let norm = 1.0 / (n as f64).sqrt();
    let table = setup.spectrum_table(mask);
    // Idler-side factor without the object, per idler pixel.
    let idler: Vec<C64> = (0..n)
        .map(|m2| {
            let p = setup.partner(m2);
            -setup.focal(setup.far_q(m2)) * setup.gain(setup.far_q(p)) * setup.idler_factor(m2) * norm
        })
        .collect();
    let signal: Vec<C64> = (0..n).map(|m| setup.signal_factor(m)).collect();
    let values = (0..n as i64)
        .map(|s| {
            let mut acc = C64::default();
            for m1 in 0..n as i64 {
                let j = s + half - m1;
                let (m2, sign) = if (0..n as i64).contains(&j) {
                    (j, 1.0)
                } else if mode == ConvolutionMode::ZeroPadded {
                    continue;
                } else {
                    (j.rem_euclid(n as i64), -1.0)
                };
                let d = table[tab(m1 - half + m2 - half, n)];
                acc += sign * signal[m1 as usize] * idler[m2 as usize] * d;
            }
            2.0 * area * acc
        })
        .collect();
    Ok(OracleCurve {
        geometry: Geometry::PointlikeFar,
        plane: setup.signal_lo.plane,
        nx: n,
        values,
        meta: setup.meta("spatial average, far field", true, 0),
    })
}

/// Analytic far field of a lattice-scaled double slit at far pixel `m`,
/// as used for reconstructions without gain cutoff.
pub fn slit_reference(mask: &ObjectMask, grid: &Grid) -> Vec<C64> {
    (0..grid.nx)
        .map(|m| {
            let qp = grid.far_x(m) * grid.dx;
            mask.spectrum_x(qp) * sinc(0.5 * qp)
        })
        .collect()
}

/// Angle that rotates a complex reference onto the real axis at its peak.
pub fn peak_phase(values: &[C64]) -> f64 {
    values
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .map(|v| v.arg())
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{derive_scales, BeamCoefficients, Config};
    use crate::correlator::reconstruct_nearfield;
    use crate::homodyne::TemporalProfile;
    use crate::optics::{make_double_slit, Lens, SlitParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn grid(nx: usize, nt: usize) -> Grid {
        Grid { nx, ny: 1, nt, dx: 0.25, dy: 1.0, dt: 0.5 }
    }

    /// No dispersion, no mismatch: the gain function is a real constant.
    fn flat_model() -> ModeModel {
        let b = BeamCoefficients { group: 0.0, gvd: 0.0, walkoff: 0.0, diffraction: 0.0 };
        ModeModel { gain: 1.0, mismatch: 0.0, beams: [b, b] }
    }

    fn reference() -> (ModeModel, Grid) {
        let c = Config::reference();
        let s = derive_scales(&c.crystal, c.optics.focal_length).unwrap();
        (ModeModel::new(&c.crystal, &s), Grid::from_config(&c.grid))
    }

    fn far_plane(g: &Grid) -> Plane {
        Plane { kind: PlaneKind::Far, step: [g.dqx(), 1.0], unit: 1.0 }
    }

    fn near_plane(g: &Grid) -> Plane {
        Plane { kind: PlaneKind::Near, step: [g.dx, 1.0], unit: 1.0 }
    }

    fn slit(g: &Grid, plane: PlaneKind, phase: bool) -> ObjectMask {
        let p = SlitParams { width: 5.0, separation: 13.0, offset: if plane == PlaneKind::Near { 3.0 } else { 2.5 }, phase };
        make_double_slit(g.nx, 1, plane, p).unwrap()
    }

    fn los(g: &Grid, idler: PlaneKind) -> (LocalOscillator, LocalOscillator) {
        let p2 = if idler == PlaneKind::Far { far_plane(g) } else { near_plane(g) };
        (LocalOscillator::plane_wave(0, far_plane(g), g.nx, 1), LocalOscillator::plane_wave(1, p2, g.nx, 1))
    }

    fn setup<'a>(
        model: &'a ModeModel,
        g: Grid,
        t: &'a TemporalFactor,
        lo1: &'a LocalOscillator,
        lo2: &'a LocalOscillator,
    ) -> OracleSetup<'a> {
        OracleSetup {
            model,
            grid: g,
            focal_coefficient: 0.0,
            temporal: t,
            signal_lo: lo1,
            idler_lo: lo2,
            integration: Integration::Lattice,
            plateau: None,
        }
    }

    #[test]
    fn flat_gain_far_field_is_object_spectrum() {
        let g = grid(64, 4);
        let m = flat_model();
        let (lo1, mut lo2) = los(&g, PlaneKind::Far);
        lo2.psi = PI;
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = slit(&g, PlaneKind::Near, false);
        let curve = pointlike_far(&setup(&m, g, &t, &lo1, &lo2), &mask, 32).unwrap();
        let gval = t.eval(&m, 0.0).re;
        for (m2, v) in curve.values.iter().enumerate() {
            let d = mask.spectrum_x((g.far_x(32) + g.far_x(m2)) * g.dx);
            let want = 2.0 * gval * d / 8.0;
            assert_abs_diff_eq!((v - want).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn clear_object_gives_a_single_peak() {
        let g = grid(32, 4);
        let m = flat_model();
        let (lo1, lo2) = los(&g, PlaneKind::Far);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = ObjectMask::clear(32, 1, PlaneKind::Near);
        let m1 = 20;
        let curve = pointlike_far(&setup(&m, g, &t, &lo1, &lo2), &mask, m1).unwrap();
        for (m2, v) in curve.values.iter().enumerate() {
            let partner = g.far_x(m2) + g.far_x(m1);
            if partner.abs() < 1e-9 {
                assert!(v.norm() > 1.0);
            } else {
                assert!(v.norm() < 1e-12, "{m2} {v}");
            }
        }
    }

    #[test]
    fn flat_gain_telescope_images_the_object() {
        let g = grid(64, 4);
        let m = flat_model();
        let (lo1, lo2) = los(&g, PlaneKind::Near);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = slit(&g, PlaneKind::Near, false);
        let curve = pointlike_near(&setup(&m, g, &t, &lo1, &lo2), &mask, 32, None).unwrap();
        let gval = t.eval(&m, 0.0).re;
        for (i, v) in curve.values.iter().enumerate() {
            let want = C64::new(0.0, -2.0 * gval / 8.0) * mask.values[i];
            assert_abs_diff_eq!((v - want).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_of_far_oracle_equals_telescope_oracle() {
        let (m, g) = reference();
        let s = derive_scales(&Config::reference().crystal, 0.05).unwrap();
        let e = crate::gain::phase_expansion(&m);
        let (mut lo1, mut lo2f) = los(&g, PlaneKind::Far);
        let (_, mut lo2n) = los(&g, PlaneKind::Near);
        lo1.psi = 0.3;
        lo2f.psi = 1.1;
        lo2n.psi = 1.1 + FRAC_PI_2;
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2f, &g).unwrap();
        let mask = slit(&g, PlaneKind::Near, false);
        let m1 = far_plane(&g).nearest(-s.q_center_hat(), g.nx, 0);
        let mut su = setup(&m, g, &t, &lo1, &lo2f);
        su.focal_coefficient = -e.quadratic_q;
        let far = pointlike_far(&su, &mask, m1).unwrap();
        su.idler_lo = &lo2n;
        let near = pointlike_near(&su, &mask, m1, None).unwrap();
        let lens = Lens { focal_length: 1.0, k_vacuum: 1.0 };
        let (rec, _) = reconstruct_nearfield(
            &far.quadrature(Quadrature::Real),
            &far.quadrature(Quadrature::Imag),
            g.nx,
            1,
            &far.plane,
            &lens,
        )
        .unwrap();
        let peak = near.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in rec.iter().zip(&near.values) {
            assert!((a - b).norm() <= 1e-9 * peak);
        }
    }

    #[test]
    fn two_lens_and_single_lens_images_are_related_by_parity() {
        let (m, g) = reference();
        let (lo1, lo2) = los(&g, PlaneKind::Near);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = slit(&g, PlaneKind::Near, false);
        let su = setup(&m, g, &t, &lo1, &lo2);
        let tel = pointlike_near(&su, &mask, 100, None).unwrap();
        let curv = 0.37;
        let two = pointlike_near(&su, &mask, 100, Some(curv)).unwrap();
        let n = g.nx;
        for i in 0..n {
            let x = g.x(i);
            let want = tel.values[n - 1 - i] * C64::from_polar(1.0, curv * x * x);
            assert_abs_diff_eq!((two.values[i] - want).norm(), 0.0, epsilon = 1e-10);
        }
        assert_eq!(two.geometry, Geometry::PointlikeNear2f);
    }

    #[test]
    fn continuum_near_field_converges() {
        let (m, mut g) = reference();
        g.nx = 128;
        g.dx *= 4.0;
        let (lo1, lo2) = los(&g, PlaneKind::Near);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = make_double_slit(g.nx, 1, PlaneKind::Near, SlitParams { width: 3.0, separation: 9.0, offset: 5.0, phase: false }).unwrap();
        let mut su = setup(&m, g, &t, &lo1, &lo2);
        su.integration = Integration::Continuum;
        let c = pointlike_near(&su, &mask, 40, None).unwrap();
        assert!(c.meta.converged, "{:?}", c.meta);
        assert!(c.meta.refinements >= 1);
        // Flat gain: the continuum integral over the grid band reproduces the
        // band-limited (sinc-weighted) image, close to the lattice image.
        let flat = flat_model();
        su.model = &flat;
        let cl = pointlike_near(&OracleSetup { integration: Integration::Lattice, ..su }, &mask, 64, None).unwrap();
        let cc = pointlike_near(&su, &mask, 64, None).unwrap();
        let num: f64 = cl.values.iter().zip(&cc.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = cl.values.iter().map(|a| a.norm_sqr()).sum();
        assert!((num / den).sqrt() < 0.2);
    }

    #[test]
    fn bucket_near_envelope_and_signal_weight() {
        let (m, g) = reference();
        let (mut lo1, lo2) = los(&g, PlaneKind::Far);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let clear = ObjectMask::clear(g.nx, 1, PlaneKind::Far);
        let plain = bucket_near(&setup(&m, g, &t, &lo1, &lo2), &clear).unwrap();
        for (m2, v) in plain.values.iter().enumerate() {
            let p = Grid::mirror(m2, g.nx);
            assert_abs_diff_eq!(v.norm(), 2.0 * g.dqx() * t.eval(&m, g.far_x(p)).norm(), epsilon = 1e-12);
        }
        for (i, a) in lo1.modulus.iter_mut().enumerate() {
            *a = (-(g.far_x(i) / 5.0).powi(2)).exp();
        }
        let weighted = bucket_near(&setup(&m, g, &t, &lo1, &lo2), &clear).unwrap();
        for m2 in 0..g.nx {
            let p = Grid::mirror(m2, g.nx);
            assert_abs_diff_eq!((weighted.values[m2] - plain.values[m2] * lo1.modulus[p]).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bucket_far_with_flat_gain_is_object_transform() {
        let g = grid(64, 4);
        let m = flat_model();
        let (lo1, mut lo2) = los(&g, PlaneKind::Near);
        lo2.psi = -FRAC_PI_2;
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = slit(&g, PlaneKind::Far, true);
        let curve = bucket_far(&setup(&m, g, &t, &lo1, &lo2), &mask).unwrap();
        let gval = t.eval(&m, 0.0).re;
        for (i, v) in curve.values.iter().enumerate() {
            let x = g.x(i);
            let ft: C64 = (0..64).map(|m1| mask.values[m1] * C64::from_polar(1.0, -g.far_x(m1) * x)).sum::<C64>() / 8.0;
            let want = 2.0 * gval * g.dqx() * ft;
            assert_abs_diff_eq!((v - want).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn continuum_bucket_far_reports_convergence() {
        let (m, mut g) = reference();
        g.nx = 64;
        g.dx *= 8.0;
        let (lo1, lo2) = los(&g, PlaneKind::Near);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        for mask in [ObjectMask::clear(g.nx, 1, PlaneKind::Far), slit(&g, PlaneKind::Far, true)] {
            let mut su = setup(&m, g, &t, &lo1, &lo2);
            su.integration = Integration::Continuum;
            let c = bucket_far(&su, &mask).unwrap();
            assert!(c.values.iter().all(|v| v.re.is_finite()));
            assert!(c.meta.refinements >= 1);
            // sharp object edges sit on refinement nodes
            assert!(c.meta.converged);
        }
    }

    #[test]
    fn cell_values_average_on_boundaries() {
        let v = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(3.0, 0.0)];
        assert_eq!(cell_value(&v, 1.2).re, -1.0);
        assert_eq!(cell_value(&v, 0.5).re, 0.0);
        assert_eq!(cell_value(&v, 1.5).re, 1.0);
        assert_eq!(cell_value(&v, -0.5).re, 1.0);
        assert_eq!(cell_value(&v, 2.5).re, 3.0);
        assert_eq!(cell_value(&v, 4.0).re, 0.0);
    }

    #[test]
    fn convolution_expectation_is_proportional_to_object_spectrum() {
        let g = grid(32, 4);
        let (m, _) = reference();
        let (lo1, lo2) = los(&g, PlaneKind::Far);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = slit(&g, PlaneKind::Near, false);
        let su = setup(&m, g, &t, &lo1, &lo2);
        let e = convolution_expectation(&su, &mask, ConvolutionMode::Circular).unwrap();
        // Plain LOs: the sum over signal pixels does not depend on the sum coordinate.
        let k: C64 = (0..32)
            .map(|m2| -t.eval(&m, g.far_x(Grid::mirror(m2, 32))) / (32f64).sqrt())
            .sum::<C64>()
            * 2.0
            * g.dqx();
        for (s, v) in e.values.iter().enumerate() {
            let d = mask.spectrum_x(g.far_x(s) * g.dx);
            assert_abs_diff_eq!((v - k * d).norm(), 0.0, epsilon = 1e-10);
        }
        let z = convolution_expectation(&su, &mask, ConvolutionMode::ZeroPadded).unwrap();
        assert!(z.values.iter().zip(&e.values).any(|(a, b)| (a - b).norm() > 1e-6));
    }

    #[test]
    fn convolution_expectation_matches_pairwise_far_oracle() {
        let (m, mut g) = reference();
        g.nx = 32;
        let (mut lo1, mut lo2) = los(&g, PlaneKind::Far);
        lo1.tilt = 0.2;
        lo2.psi = 0.4;
        lo2.tilt = -0.3;
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = slit(&g, PlaneKind::Near, true);
        let mut su = setup(&m, g, &t, &lo1, &lo2);
        su.focal_coefficient = 0.1;
        let e = convolution_expectation(&su, &mask, ConvolutionMode::ZeroPadded).unwrap();
        let rows: Vec<OracleCurve> = (0..32).map(|m1| pointlike_far(&su, &mask, m1).unwrap()).collect();
        for s in 0..32usize {
            let mut acc = C64::default();
            for m1 in 0..32usize {
                let j = s as i64 + 16 - m1 as i64;
                if (0..32).contains(&j) {
                    acc += rows[m1].values[j as usize];
                }
            }
            assert_abs_diff_eq!((e.values[s] - acc * g.dqx()).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn cw_factor_uses_zero_frequency_only() {
        let (m, g) = reference();
        let (lo1, lo2) = los(&g, PlaneKind::Far);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        assert_eq!(t.terms.len(), 1);
        let q = -3.0;
        assert_abs_diff_eq!((t.eval(&m, q) - m.correlation(q, 0.0, 0.0) * g.dt * g.nt as f64 * g.dt).norm(), 0.0, epsilon = 1e-9);
        // Continuous LOs through the pulsed path give the same weight.
        let p = temporal_factor(TemporalMode::Pulsed, &lo1, &lo2, &g).unwrap();
        assert_abs_diff_eq!((p.eval(&m, q) - t.eval(&m, q)).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn short_window_is_rejected() {
        let g = Grid { nx: 8, ny: 1, nt: 4, dx: 1.0, dy: 1.0, dt: 0.25 };
        let lo = LocalOscillator::plane_wave(0, far_plane(&g), 8, 1);
        assert!(matches!(temporal_factor(TemporalMode::Cw, &lo, &lo, &g), Err(Error::Config(_))));
    }

    #[test]
    fn disjoint_pulses_do_not_correlate() {
        let g = Grid { nx: 8, ny: 1, nt: 64, dx: 1.0, dy: 1.0, dt: 0.5 };
        let m = flat_model();
        let mut lo1 = LocalOscillator::plane_wave(0, far_plane(&g), 8, 1);
        let mut lo2 = lo1.clone();
        lo1.temporal = TemporalProfile::Gaussian { duration: 0.8, delay: -8.0 };
        lo2.temporal = TemporalProfile::Gaussian { duration: 0.8, delay: 8.0 };
        let t = temporal_factor(TemporalMode::Pulsed, &lo1, &lo2, &g).unwrap();
        assert!(t.eval(&m, 0.0).norm() < 1e-12);
        lo2.temporal = TemporalProfile::Gaussian { duration: 0.8, delay: -8.0 };
        let t = temporal_factor(TemporalMode::Pulsed, &lo1, &lo2, &g).unwrap();
        assert!(t.eval(&m, 0.0).norm() > 0.1);
    }

    #[test]
    fn delay_compensation_raises_the_pulsed_weight() {
        let (m, g) = reference();
        let e = crate::gain::phase_expansion(&m);
        let c = Config::reference();
        let s = derive_scales(&c.crystal, 0.05).unwrap();
        let tau = c.pump.duration / s.tau_coh;
        let mut lo1 = LocalOscillator::plane_wave(0, far_plane(&g), g.nx, 1);
        lo1.temporal = TemporalProfile::Gaussian { duration: tau, delay: 0.0 };
        let mut lo2 = lo1.clone();
        let plain = temporal_factor(TemporalMode::Pulsed, &lo1, &lo2, &g).unwrap();
        lo2.temporal = TemporalProfile::Gaussian { duration: tau, delay: -crate::homodyne::lo_temporal_delay(&e) };
        let comp = temporal_factor(TemporalMode::Pulsed, &lo1, &lo2, &g).unwrap();
        let qc = -s.q_center_hat();
        assert!(comp.eval(&m, qc).norm() > plain.eval(&m, qc).norm());
    }

    #[test]
    fn plateau_keeps_modulus_constant() {
        let (m, g) = reference();
        let e = crate::gain::phase_expansion(&m);
        let (lo1, lo2) = los(&g, PlaneKind::Far);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mut su = setup(&m, g, &t, &lo1, &lo2);
        su.plateau = Some(Plateau { center: -8.6, expansion: e });
        let a = su.gain(-8.6);
        let b = su.gain(2.0);
        assert_abs_diff_eq!(a.norm(), b.norm(), epsilon = 1e-9);
        assert_abs_diff_eq!((a - t.eval(&m, -8.6)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_fit_recovers_parameters() {
        let x: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let w = GaussianWeight { center: 1.3, sigma: 1.7 };
        let y: Vec<f64> = x.iter().map(|x| 0.2 + 3.0 * w.eval(*x)).collect();
        let fit = fit_gaussian(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.center, 1.3, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.sigma, 1.7, epsilon = 2e-2);
        assert!(fit_gaussian(&x, &vec![1.0; 200]).is_err());
    }

    #[test]
    fn mismatched_lo_plane_is_rejected() {
        let g = grid(16, 4);
        let m = flat_model();
        let (lo1, lo2) = los(&g, PlaneKind::Near);
        let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
        let mask = ObjectMask::clear(16, 1, PlaneKind::Near);
        assert!(pointlike_far(&setup(&m, g, &t, &lo1, &lo2), &mask, 3).is_err());
    }

    proptest! {
        #[test]
        fn curves_are_bilinear_in_lo_amplitudes(a in 0.1f64..3.0, b in 0.1f64..3.0, m1 in 0usize..32) {
            let g = grid(32, 4);
            let (model, _) = reference();
            let (lo1, lo2) = los(&g, PlaneKind::Far);
            let t = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g).unwrap();
            let mask = slit(&g, PlaneKind::Near, false);
            let base = pointlike_far(&setup(&model, g, &t, &lo1, &lo2), &mask, m1).unwrap();
            let mut s1 = lo1.clone();
            s1.modulus.iter_mut().for_each(|v| *v *= a);
            let mut s2 = lo2.clone();
            s2.modulus.iter_mut().for_each(|v| *v *= b);
            let scaled = pointlike_far(&setup(&model, g, &t, &s1, &s2), &mask, m1).unwrap();
            for (x, y) in base.values.iter().zip(&scaled.values) {
                prop_assert!((x * a * b - y).norm() <= 1e-12 * (1.0 + x.norm()));
            }
        }

        #[test]
        fn cw_curves_scale_with_window(nt in 2usize..8) {
            let g1 = grid(16, 2 * nt);
            let g2 = Grid { nt: 4 * nt, ..g1 };
            let (model, _) = reference();
            let (lo1, lo2) = los(&g1, PlaneKind::Far);
            let t1 = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g1).unwrap();
            let t2 = temporal_factor(TemporalMode::Cw, &lo1, &lo2, &g2).unwrap();
            prop_assert!((t2.eval(&model, 1.0) - 2.0 * t1.eval(&model, 1.0)).norm() < 1e-9);
        }
    }
}
