//! Field lattices and the FFT machinery shared by propagation and optics.
//!
//! Storage order is `[t][y][x]` with `x` fastest. Spectral data is kept in
//! the natural FFT order (zero frequency first). Near-field sample
//! coordinates are centred half-integers, `(n - (N-1)/2) * step`, which
//! makes the grid symmetric under `x -> -x`; far-field coordinates are
//! integers, `(m - N/2) * step`, so that sums of far-field coordinates stay
//! on the grid.

use crate::config::GridConfig;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub type C64 = Complex64;

/// Signed frequency index of FFT bin `k` for a transform of length `n`.
#[inline]
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Near-field (half-integer) coordinate of sample `n` in units of the pitch.
#[inline]
pub fn near_coord(n: usize, len: usize) -> f64 {
    n as f64 - (len as f64 - 1.0) / 2.0
}

/// Far-field (integer) coordinate of sample `m` in units of the pitch.
#[inline]
pub fn far_coord(m: usize, len: usize) -> f64 {
    m as f64 - (len / 2) as f64
}

/// Phase relating FFT bin `k` of near-field samples to the centred transform
/// evaluated at the far-field coordinate of that frequency.
#[inline]
fn centering_phase(k: usize, n: usize) -> C64 {
    let s = signed_index(k, n) as f64;
    // (-1)^s * exp(-i pi s / n), written as one exponential.
    C64::from_polar(1.0, PI * s - PI * s / n as f64)
}

/// Discretisation of the simulation volume in coherence units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Near-field pitch in `x_coh`.
    pub dx: f64,
    pub dy: f64,
    /// Time step in `tau_coh`.
    pub dt: f64,
}

impl Grid {
    pub fn from_config(g: &GridConfig) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            nt: g.nt,
            dx: g.dx(),
            dy: g.dy(),
            dt: g.dt(),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, it: usize, iy: usize, ix: usize) -> usize {
        (it * self.ny + iy) * self.nx + ix
    }

    pub fn x(&self, ix: usize) -> f64 {
        near_coord(ix, self.nx) * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        near_coord(iy, self.ny) * self.dy
    }

    pub fn t(&self, it: usize) -> f64 {
        near_coord(it, self.nt) * self.dt
    }

    /// Far-field pitch in `q0` (equivalently `x_f`) units.
    pub fn dqx(&self) -> f64 {
        2.0 * PI / (self.nx as f64 * self.dx)
    }

    pub fn dqy(&self) -> f64 {
        if self.ny == 1 {
            1.0
        } else {
            2.0 * PI / (self.ny as f64 * self.dy)
        }
    }

    pub fn domega(&self) -> f64 {
        2.0 * PI / (self.nt as f64 * self.dt)
    }

    /// Transverse wave vector of FFT bin `k` along x.
    pub fn qx_bin(&self, k: usize) -> f64 {
        signed_index(k, self.nx) as f64 * self.dqx()
    }

    pub fn qy_bin(&self, k: usize) -> f64 {
        signed_index(k, self.ny) as f64 * self.dqy()
    }

    /// Frequency of FFT bin `k` along t. Fields evolve as `exp(-i omega t)`,
    /// so a forward FFT bin maps to minus its signed frequency.
    pub fn omega_bin(&self, k: usize) -> f64 {
        -(signed_index(k, self.nt) as f64) * self.domega()
    }

    /// FFT bin holding `-omega_bin(k)` (and likewise for the spatial axes).
    #[inline]
    pub fn mirror(k: usize, n: usize) -> usize {
        (n - k) % n
    }

    /// Wave vector and frequency `[q_x, q_y, omega]` that FFT bin
    /// `(kt, ky, kx)` represents for `beam`. The idler bins are defined as the
    /// negatives of their mirror bins so that every signal mode and its idler
    /// partner have exactly opposite arguments, including the self-mirrored
    /// Nyquist bins.
    pub fn beam_bin(&self, beam: usize, kt: usize, ky: usize, kx: usize) -> [f64; 3] {
        if beam == 0 {
            [self.qx_bin(kx), self.qy_bin(ky), self.omega_bin(kt)]
        } else {
            [
                -self.qx_bin(Self::mirror(kx, self.nx)),
                -self.qy_bin(Self::mirror(ky, self.ny)),
                -self.omega_bin(Self::mirror(kt, self.nt)),
            ]
        }
    }

    pub fn far_x(&self, m: usize) -> f64 {
        far_coord(m, self.nx) * self.dqx()
    }

    pub fn far_y(&self, m: usize) -> f64 {
        far_coord(m, self.ny) * self.dqy()
    }

    /// The time frequencies present on the lattice, in bin order.
    pub fn omegas(&self) -> Vec<f64> {
        (0..self.nt).map(|k| self.omega_bin(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Position,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneKind {
    /// Image of the crystal exit face; coordinates in `x_coh`-like units.
    Near,
    /// Fourier plane of a lens; coordinates in `x_f`-like units.
    Far,
}

/// Transverse sampling of a detection or object plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub kind: PlaneKind,
    /// Pitch along x and y in plane units.
    pub step: [f64; 2],
    /// Length of one plane unit in metres.
    pub unit: f64,
}

impl Plane {
    pub fn coord(&self, i: usize, n: usize, axis: usize) -> f64 {
        match self.kind {
            PlaneKind::Near => near_coord(i, n) * self.step[axis],
            PlaneKind::Far => far_coord(i, n) * self.step[axis],
        }
    }

    /// Physical pitch (m).
    pub fn pitch(&self) -> [f64; 2] {
        [self.step[0] * self.unit, self.step[1] * self.unit]
    }

    /// Index of the sample nearest to coordinate `x` along an axis of length `n`.
    pub fn nearest(&self, x: f64, n: usize, axis: usize) -> usize {
        let offset = match self.kind {
            PlaneKind::Near => (n as f64 - 1.0) / 2.0,
            PlaneKind::Far => (n / 2) as f64,
        };
        let i = (x / self.step[axis] + offset).round();
        i.clamp(0.0, n as f64 - 1.0) as usize
    }
}

/// Complex field on the lattice, unitary normalisation in both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLattice {
    pub grid: Grid,
    pub data: Vec<C64>,
    pub domain: Domain,
    pub plane: Plane,
}

impl FieldLattice {
    pub fn zeros(grid: Grid, plane: Plane) -> Self {
        Self {
            grid,
            data: vec![C64::new(0.0, 0.0); grid.len()],
            domain: Domain::Position,
            plane,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn to_fourier(&mut self, fft: &Spectral) {
        if self.domain == Domain::Position {
            fft.forward(&mut self.data, Axes::ALL);
            scale(&mut self.data, 1.0 / (self.grid.len() as f64).sqrt());
            self.domain = Domain::Fourier;
        }
    }

    pub fn to_position(&mut self, fft: &Spectral) {
        if self.domain == Domain::Fourier {
            fft.inverse(&mut self.data, Axes::ALL);
            scale(&mut self.data, 1.0 / (self.grid.len() as f64).sqrt());
            self.domain = Domain::Position;
        }
    }
}

pub fn scale(data: &mut [C64], s: f64) {
    for v in data {
        *v *= s;
    }
}

/// Selection of axes to transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axes {
    pub x: bool,
    pub y: bool,
    pub t: bool,
}

impl Axes {
    pub const ALL: Axes = Axes { x: true, y: true, t: true };
    pub const SPATIAL: Axes = Axes { x: true, y: true, t: false };
    pub const TIME: Axes = Axes { x: false, y: false, t: true };
}

#[derive(Clone)]
struct AxisPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Cached FFT plans for one grid. Transforms are unnormalised.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    x: AxisPlans,
    y: AxisPlans,
    t: AxisPlans,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let mut plans = |n: usize| AxisPlans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Self {
            grid,
            x: plans(grid.nx),
            y: plans(grid.ny),
            t: plans(grid.nt),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn forward(&self, data: &mut [C64], axes: Axes) {
        self.run(data, axes, true);
    }

    pub fn inverse(&self, data: &mut [C64], axes: Axes) {
        self.run(data, axes, false);
    }

    fn run(&self, data: &mut [C64], axes: Axes, forward: bool) {
        let g = self.grid;
        assert_eq!(data.len(), g.len(), "buffer does not match the grid");
        let pick = |p: &AxisPlans| if forward { p.forward.clone() } else { p.inverse.clone() };
        if axes.x && g.nx > 1 {
            let plan = pick(&self.x);
            let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(data, &mut scratch);
        }
        if axes.y && g.ny > 1 {
            let plan = pick(&self.y);
            let plane = g.ny * g.nx;
            for block in data.chunks_exact_mut(plane) {
                strided_fft(block, g.ny, g.nx, plan.as_ref());
            }
        }
        if axes.t && g.nt > 1 {
            let plan = pick(&self.t);
            strided_fft(data, g.nt, g.ny * g.nx, plan.as_ref());
        }
    }
}

/// FFT along the slow axis of a `[n][lanes]` block by transposing through a buffer.
fn strided_fft(block: &mut [C64], n: usize, lanes: usize, plan: &dyn Fft<f64>) {
    let mut buf = vec![C64::default(); n * lanes];
    for i in 0..n {
        let row = &block[i * lanes..(i + 1) * lanes];
        for (l, v) in row.iter().enumerate() {
            buf[l * n + i] = *v;
        }
    }
    let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(&mut buf, &mut scratch);
    for i in 0..n {
        let row = &mut block[i * lanes..(i + 1) * lanes];
        for (l, v) in row.iter_mut().enumerate() {
            *v = buf[l * n + i];
        }
    }
}

/// Per-axis tables that map between FFT bins of near-field samples and the
/// centred far-field grid.
#[derive(Debug, Clone)]
pub struct Centering {
    px: Vec<C64>,
    py: Vec<C64>,
    nx: usize,
    ny: usize,
}

impl Centering {
    pub fn new(grid: &Grid) -> Self {
        Self {
            px: (0..grid.nx).map(|k| centering_phase(k, grid.nx)).collect(),
            py: (0..grid.ny).map(|k| centering_phase(k, grid.ny)).collect(),
            nx: grid.nx,
            ny: grid.ny,
        }
    }

    /// Far-field sample index of FFT bin `k`.
    #[inline]
    fn far_index(k: usize, n: usize) -> usize {
        (k + n / 2) % n
    }

    /// Spatially forward-transformed data (FFT order, unitary) to the centred
    /// far-field grid, i.e. `sum_n a_n exp(-i q_m x_n) / sqrt(N)`.
    pub fn bins_to_far(&self, bins: &[C64], out: &mut [C64]) {
        let plane = self.nx * self.ny;
        for (src, dst) in bins.chunks_exact(plane).zip(out.chunks_exact_mut(plane)) {
            for ky in 0..self.ny {
                let my = Self::far_index(ky, self.ny);
                for kx in 0..self.nx {
                    let mx = Self::far_index(kx, self.nx);
                    dst[my * self.nx + mx] = src[ky * self.nx + kx] * self.px[kx] * self.py[ky];
                }
            }
        }
    }

    /// Inverse of [`Centering::bins_to_far`].
    pub fn far_to_bins(&self, far: &[C64], out: &mut [C64]) {
        let plane = self.nx * self.ny;
        for (src, dst) in far.chunks_exact(plane).zip(out.chunks_exact_mut(plane)) {
            for ky in 0..self.ny {
                let my = Self::far_index(ky, self.ny);
                for kx in 0..self.nx {
                    let mx = Self::far_index(kx, self.nx);
                    dst[ky * self.nx + kx] = src[my * self.nx + mx] * (self.px[kx] * self.py[ky]).conj();
                }
            }
        }
    }
}

/// Unitary transform from a near-field plane to the far-field grid, along
/// the spatial axes: `c_m = sum_n a_n exp(-i q_m x_n) / sqrt(N)`.
pub fn near_to_far(data: &mut [C64], fft: &Spectral, centering: &Centering) {
    let g = *fft.grid();
    fft.forward(data, Axes::SPATIAL);
    scale(data, 1.0 / (g.spatial_len() as f64).sqrt());
    let bins = data.to_vec();
    centering.bins_to_far(&bins, data);
}

/// Unitary transform from far-field samples to near-field coordinates with
/// the same kernel sign: `a_n = sum_m c_m exp(-i x_n q_m) / sqrt(N)`.
pub fn far_to_near(data: &mut [C64], fft: &Spectral, centering: &Centering) {
    // With q_m = s*dq and x_n = (n - N/2 + 1/2) dx the kernel factors into
    // exp(-2 pi i s n / N) times the centering phase of bin s, so the far
    // samples are moved to their FFT bins, twisted, and transformed; the
    // output bin index is then the near-field sample index.
    let g = *fft.grid();
    let plane = g.spatial_len();
    let mut bins = vec![C64::default(); data.len()];
    for (src, dst) in data.chunks_exact(plane).zip(bins.chunks_exact_mut(plane)) {
        for my in 0..g.ny {
            let ky = (my + g.ny - g.ny / 2) % g.ny;
            for mx in 0..g.nx {
                let kx = (mx + g.nx - g.nx / 2) % g.nx;
                dst[ky * g.nx + kx] =
                    src[my * g.nx + mx] * centering.px[kx] * centering.py[ky];
            }
        }
    }
    fft.forward(&mut bins, Axes::SPATIAL);
    scale(&mut bins, 1.0 / (plane as f64).sqrt());
    data.copy_from_slice(&bins);
}

/// Inverse of [`near_to_far`]: far-field samples back to the near field.
pub fn far_to_near_inverse(data: &mut [C64], fft: &Spectral, centering: &Centering) {
    let g = *fft.grid();
    let far = data.to_vec();
    centering.far_to_bins(&far, data);
    fft.inverse(data, Axes::SPATIAL);
    scale(data, 1.0 / (g.spatial_len() as f64).sqrt());
}
