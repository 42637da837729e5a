//! Lens systems between the crystal and the detectors, object masks and the
//! focal-plane shift.
//!
//! Optical elements act on position-domain lattices `(x, t)` per time slice.
//! Every f-f stage carries the factor `-i` (the unit-modulus part of
//! `1/(i lambda f)`) and rescales the plane: a plane with unit `u` and pitch
//! `s` maps to unit `f / (k_v u)` and pitch `2 pi / (N s)`.

use crate::config::{Config, ObjectKind};
use crate::error::{config_err, Error, Result};
use crate::lattice::{
    far_coord, far_to_near, near_coord, near_to_far, scale, signed_index, Axes, Centering, Domain, FieldLattice,
    Grid, Plane, PlaneKind, Spectral, C64,
};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lens {
    /// Focal length (m).
    pub focal_length: f64,
    /// Vacuum wave number (1/m).
    pub k_vacuum: f64,
}

impl Lens {
    /// Plane reached from `plane` through one f-f stage with `n` samples per axis.
    pub fn fourier_plane(&self, plane: &Plane, n: [usize; 2]) -> Plane {
        let kind = match plane.kind {
            PlaneKind::Near => PlaneKind::Far,
            PlaneKind::Far => PlaneKind::Near,
        };
        let step = |axis: usize| {
            if n[axis] == 1 {
                plane.step[axis]
            } else {
                2.0 * PI / (n[axis] as f64 * plane.step[axis])
            }
        };
        Plane {
            kind,
            step: [step(0), step(1)],
            unit: self.focal_length / (self.k_vacuum * plane.unit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitParams {
    /// Slit width (pixels).
    pub width: f64,
    /// Centre-to-centre separation (pixels).
    pub separation: f64,
    /// Displacement of the pair (pixels).
    pub offset: f64,
    /// `{-1, 1}` phase slit instead of a `{0, 1}` amplitude slit.
    pub phase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskKind {
    Clear,
    DoubleSlit(SlitParams),
    Bitmap { source: String },
}

/// Complex transmission sampled on the spatial lattice of one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    pub nx: usize,
    pub ny: usize,
    pub plane: PlaneKind,
    /// Row-major `[y][x]`.
    pub values: Vec<C64>,
    pub kind: MaskKind,
}

/// Overlap of cell `[c - 1/2, c + 1/2]` with the interval `[lo, hi]`.
fn overlap(c: f64, lo: f64, hi: f64) -> f64 {
    ((c + 0.5).min(hi) - (c - 0.5).max(lo)).max(0.0)
}

fn pixel_coord(kind: PlaneKind, i: usize, n: usize) -> f64 {
    match kind {
        PlaneKind::Near => near_coord(i, n),
        PlaneKind::Far => far_coord(i, n),
    }
}

impl ObjectMask {
    pub fn clear(nx: usize, ny: usize, plane: PlaneKind) -> Self {
        Self {
            nx,
            ny,
            plane,
            values: vec![C64::new(1.0, 0.0); nx * ny],
            kind: MaskKind::Clear,
        }
    }

    /// Transmission profile along x (the mask is taken at the first row).
    pub fn row(&self) -> Vec<C64> {
        self.values[..self.nx].to_vec()
    }

    pub fn is_uniform_in_y(&self) -> bool {
        self.values.chunks_exact(self.nx).all(|r| r == &self.values[..self.nx])
    }

    /// Lattice spectrum `sum_n T_n exp(-i q x_n) / sqrt(N)` along x with `q`
    /// in radians per pixel, evaluated directly so any `q` is allowed.
    pub fn spectrum_x(&self, q: f64) -> C64 {
        let norm = 1.0 / (self.nx as f64).sqrt();
        self.row()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.norm_sqr() > 0.0)
            .map(|(n, t)| t * C64::from_polar(1.0, -q * pixel_coord(self.plane, n, self.nx)))
            .sum::<C64>()
            * norm
    }

    /// Continuous Fourier transform `(1/sqrt(2 pi)) int T(x) exp(-i q x) dx`
    /// of the pixelated row (piecewise constant over cells), pixel units.
    pub fn continuous_spectrum_x(&self, q: f64) -> C64 {
        self.spectrum_x(q) * (self.nx as f64).sqrt() / (2.0 * PI).sqrt() * sinc(0.5 * q)
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Double slit of width `a`, separation `d`, shifted by `offset`, on the
/// pixel grid of a near (half-integer) or far (integer) plane. Cells that a
/// slit edge cuts get the covered fraction.
pub fn make_double_slit(nx: usize, ny: usize, plane: PlaneKind, p: SlitParams) -> Result<ObjectMask> {
    if !(p.width > 0.0 && p.width < p.separation) {
        return config_err(format!(
            "slit width {} must be positive and below the separation {}",
            p.width, p.separation
        ));
    }
    let lo = pixel_coord(plane, 0, nx) - 0.5;
    let hi = pixel_coord(plane, nx - 1, nx) + 0.5;
    let slits = [
        (p.offset - 0.5 * (p.separation + p.width), p.offset - 0.5 * (p.separation - p.width)),
        (p.offset + 0.5 * (p.separation - p.width), p.offset + 0.5 * (p.separation + p.width)),
    ];
    if slits[0].0 < lo || slits[1].1 > hi {
        return config_err(format!(
            "double slit spans [{}, {}] px, outside the grid [{lo}, {hi}]",
            slits[0].0, slits[1].1
        ));
    }
    let row: Vec<C64> = (0..nx)
        .map(|i| {
            let c = pixel_coord(plane, i, nx);
            let open: f64 = slits.iter().map(|&(a, b)| overlap(c, a, b)).sum();
            let v = if p.phase { 2.0 * open - 1.0 } else { open };
            C64::new(v, 0.0)
        })
        .collect();
    let values = (0..ny).flat_map(|_| row.iter().copied()).collect();
    Ok(ObjectMask { nx, ny, plane, values, kind: MaskKind::DoubleSlit(p) })
}

/// Continuous spectrum of the ideal amplitude double slit (pixel units).
pub fn analytic_slit_spectrum(q: f64, p: &SlitParams) -> C64 {
    let a = p.width;
    C64::from_polar(a * (2.0 / PI).sqrt(), -p.offset * q) * (0.5 * q * p.separation).cos() * sinc(0.5 * q * a)
}

/// The same spectrum scaled to the unitary lattice normalisation of
/// [`ObjectMask::spectrum_x`].
pub fn analytic_slit_lattice(q: f64, p: &SlitParams, nx: usize) -> C64 {
    analytic_slit_spectrum(q, p) * (2.0 * PI).sqrt() / (nx as f64).sqrt()
}

/// Read a greyscale PNG or PGM, normalise to `[0, 1]`, optionally binarise,
/// and centre it on an `nx` by `ny` lattice with zero padding. The top image
/// row lands at the largest `y`.
pub fn load_bitmap_mask(
    path: &Path,
    nx: usize,
    ny: usize,
    plane: PlaneKind,
    threshold: Option<f64>,
    phase: bool,
) -> Result<ObjectMask> {
    let img = image::open(path)
        .map_err(|e| Error::Config(format!("cannot read mask {}: {e}", path.display())))?
        .to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w > nx || h > ny {
        return config_err(format!("mask {}x{} exceeds the {nx}x{ny} grid", w, h));
    }
    let (ox, oy) = ((nx - w) / 2, (ny - h) / 2);
    let fill = if phase { -1.0 } else { 0.0 };
    let mut values = vec![C64::new(fill, 0.0); nx * ny];
    for (x, y, px) in img.enumerate_pixels() {
        let mut v = px.0[0] as f64 / u16::MAX as f64;
        if let Some(t) = threshold {
            v = if v >= t { 1.0 } else { 0.0 };
        }
        if phase {
            v = 2.0 * v - 1.0;
        }
        let iy = oy + (h - 1 - y as usize);
        values[iy * nx + ox + x as usize] = C64::new(v, 0.0);
    }
    Ok(ObjectMask {
        nx,
        ny,
        plane,
        values,
        kind: MaskKind::Bitmap { source: path.display().to_string() },
    })
}

/// Build the configured object for a plane.
pub fn object_from_config(cfg: &Config, nx: usize, ny: usize, plane: PlaneKind) -> Result<ObjectMask> {
    let o = &cfg.object;
    match o.kind {
        ObjectKind::None => Ok(ObjectMask::clear(nx, ny, plane)),
        ObjectKind::AmplitudeSlit | ObjectKind::PhaseSlit => make_double_slit(
            nx,
            ny,
            plane,
            SlitParams {
                width: o.width,
                separation: o.separation,
                offset: o.offset,
                phase: o.kind == ObjectKind::PhaseSlit,
            },
        ),
        ObjectKind::Bitmap => {
            let path = o
                .path
                .as_deref()
                .ok_or_else(|| Error::Config("object.kind = \"bitmap\" needs object.path".into()))?;
            load_bitmap_mask(Path::new(path), nx, ny, plane, o.threshold, o.phase)
        }
    }
}

/// FFT plans and centring tables for one lattice, shared by all elements.
#[derive(Debug)]
pub struct Bench {
    fft: Spectral,
    centering: Centering,
}

impl Bench {
    pub fn new(grid: Grid) -> Self {
        Self { fft: Spectral::new(grid), centering: Centering::new(&grid) }
    }

    pub fn grid(&self) -> &Grid {
        self.fft.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.fft
    }

    pub fn centering(&self) -> &Centering {
        &self.centering
    }

    /// Unitary crystal-output spectrum (FFT order) to the exit-face field.
    pub fn exit_field(&self, spectrum: &[C64], plane: Plane) -> FieldLattice {
        let grid = *self.grid();
        let mut data = spectrum.to_vec();
        self.fft.inverse(&mut data, Axes::ALL);
        scale(&mut data, 1.0 / (grid.len() as f64).sqrt());
        FieldLattice { grid, data, domain: Domain::Position, plane }
    }

    fn check(&self, field: &FieldLattice) -> Result<()> {
        if field.domain != Domain::Position {
            return Err(Error::Numeric("optical element applied to a Fourier-domain lattice".into()));
        }
        if field.grid != *self.grid() {
            return Err(Error::Numeric("field lattice does not match the optical bench".into()));
        }
        Ok(())
    }

    /// One f-f stage: scaled Fourier transform times `-i`.
    pub fn apply_ff(&self, field: &mut FieldLattice, lens: &Lens) -> Result<()> {
        self.check(field)?;
        let g = *self.grid();
        match field.plane.kind {
            PlaneKind::Near => near_to_far(&mut field.data, &self.fft, &self.centering),
            PlaneKind::Far => far_to_near(&mut field.data, &self.fft, &self.centering),
        }
        scale_complex(&mut field.data, C64::new(0.0, -1.0));
        field.plane = lens.fourier_plane(&field.plane, [g.nx, g.ny]);
        Ok(())
    }

    /// Two-lens relay with unit magnification: the identity on the lattice.
    pub fn apply_telescope(&self, field: &mut FieldLattice) -> Result<()> {
        self.check(field)
    }

    /// Single-lens 2f-2f imaging: parity inversion times
    /// `exp(-i k_v |x|^2 / (2 f))`.
    pub fn apply_2f2f(&self, field: &mut FieldLattice, lens: &Lens) -> Result<()> {
        self.check(field)?;
        if field.plane.kind != PlaneKind::Near {
            return Err(Error::Numeric("2f-2f imaging needs a near-field plane".into()));
        }
        let g = *self.grid();
        let curv = -lens.k_vacuum * field.plane.unit * field.plane.unit / (2.0 * lens.focal_length);
        let plane = g.spatial_len();
        for slice in field.data.chunks_exact_mut(plane) {
            slice.reverse();
            for iy in 0..g.ny {
                let y = field.plane.coord(iy, g.ny, 1);
                let y2 = if g.ny > 1 { y * y } else { 0.0 };
                for ix in 0..g.nx {
                    let x = field.plane.coord(ix, g.nx, 0);
                    slice[iy * g.nx + ix] *= C64::from_polar(1.0, curv * (x * x + y2));
                }
            }
        }
        Ok(())
    }

    pub fn apply_object(&self, field: &mut FieldLattice, mask: &ObjectMask) -> Result<()> {
        self.check(field)?;
        let g = *self.grid();
        if mask.plane != field.plane.kind || mask.nx != g.nx || mask.ny != g.ny {
            return Err(Error::Numeric("object mask does not match the plane it is applied in".into()));
        }
        for slice in field.data.chunks_exact_mut(g.spatial_len()) {
            for (c, t) in slice.iter_mut().zip(&mask.values) {
                *c *= t;
            }
        }
        Ok(())
    }

    /// Shift of the near-field image plane: multiplies the spatial spectrum by
    /// `exp(i coefficient |q|^2)` with `q` in reciprocal plane units.
    pub fn apply_focal_shift(&self, field: &mut FieldLattice, coefficient: f64) -> Result<()> {
        self.check(field)?;
        if coefficient == 0.0 {
            return Ok(());
        }
        if field.plane.kind != PlaneKind::Near {
            return Err(Error::Numeric("focal shift applies to a near-field plane".into()));
        }
        let g = *self.grid();
        self.fft.forward(&mut field.data, Axes::SPATIAL);
        let table = focal_table(&g, field.plane.step, coefficient);
        let norm = 1.0 / g.spatial_len() as f64;
        for slice in field.data.chunks_exact_mut(g.spatial_len()) {
            for (c, h) in slice.iter_mut().zip(&table) {
                *c *= h * norm;
            }
        }
        self.fft.inverse(&mut field.data, Axes::SPATIAL);
        Ok(())
    }
}

/// `exp(i coefficient |q|^2)` over the spatial FFT bins.
pub fn focal_table(g: &Grid, step: [f64; 2], coefficient: f64) -> Vec<C64> {
    let dq = |n: usize, s: f64| if n == 1 { 0.0 } else { 2.0 * PI / (n as f64 * s) };
    let (dqx, dqy) = (dq(g.nx, step[0]), dq(g.ny, step[1]));
    let mut out = Vec::with_capacity(g.spatial_len());
    for ky in 0..g.ny {
        let qy = signed_index(ky, g.ny) as f64 * dqy;
        for kx in 0..g.nx {
            let qx = signed_index(kx, g.nx) as f64 * dqx;
            out.push(C64::from_polar(1.0, coefficient * (qx * qx + qy * qy)));
        }
    }
    out
}

/// Multiply a spectrum in FFT order (all axes) by the focal-shift phase.
pub fn focal_shift_spectrum(spectrum: &mut [C64], g: &Grid, coefficient: f64) {
    if coefficient == 0.0 {
        return;
    }
    let table = focal_table(g, [g.dx, g.dy], coefficient);
    for slice in spectrum.chunks_exact_mut(g.spatial_len()) {
        for (c, h) in slice.iter_mut().zip(&table) {
            *c *= h;
        }
    }
}

fn scale_complex(data: &mut [C64], s: C64) {
    for v in data {
        *v *= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(nx: usize, ny: usize, nt: usize) -> Grid {
        Grid { nx, ny, nt, dx: 0.25, dy: 0.3, dt: 0.5 }
    }

    fn near(g: &Grid) -> Plane {
        Plane { kind: PlaneKind::Near, step: [g.dx, g.dy], unit: 1.0e-5 }
    }

    fn lens() -> Lens {
        Lens { focal_length: 0.05, k_vacuum: 2.0 * PI / 704e-9 }
    }

    fn random_field(g: Grid, seed: u64) -> FieldLattice {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let data = (0..g.len()).map(|_| C64::new(next(), next())).collect();
        FieldLattice { grid: g, data, domain: Domain::Position, plane: near(&g) }
    }

    fn reference_slit() -> SlitParams {
        SlitParams { width: 9.0, separation: 33.0, offset: 23.0, phase: false }
    }

    #[test]
    fn reference_slit_is_binary_on_near_grid() {
        let m = make_double_slit(512, 1, PlaneKind::Near, reference_slit()).unwrap();
        assert!(m.values.iter().all(|v| v.re == 0.0 || v.re == 1.0));
        let open = m.values.iter().filter(|v| v.re == 1.0).count();
        assert_eq!(open, 18);
        let p = make_double_slit(512, 1, PlaneKind::Near, SlitParams { phase: true, ..reference_slit() }).unwrap();
        assert!(p.values.iter().all(|v| v.re == -1.0 || v.re == 1.0));
    }

    #[test]
    fn far_plane_slit_with_half_pixel_offset_is_binary() {
        let p = SlitParams { width: 9.0, separation: 33.0, offset: -158.5, phase: true };
        let m = make_double_slit(512, 1, PlaneKind::Far, p).unwrap();
        assert!(m.values.iter().all(|v| v.re == -1.0 || v.re == 1.0));
    }

    #[test]
    fn fractional_edges_get_covered_fraction() {
        let p = SlitParams { width: 2.0, separation: 6.0, offset: 0.25, phase: false };
        let m = make_double_slit(32, 1, PlaneKind::Far, p).unwrap();
        // Right slit spans [2.25, 4.25]: cells 2, 3, 4 get 0.25, 1, 0.75.
        assert_abs_diff_eq!(m.values[16 + 2].re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.values[16 + 3].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.values[16 + 4].re, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn slit_off_grid_is_rejected() {
        let p = SlitParams { width: 9.0, separation: 33.0, offset: 240.0, phase: false };
        assert!(make_double_slit(512, 1, PlaneKind::Near, p).is_err());
    }

    #[test]
    fn analytic_spectrum_values() {
        let p = reference_slit();
        assert_abs_diff_eq!(analytic_slit_spectrum(0.0, &p).re, 9.0 * (2.0 / PI).sqrt(), epsilon = 1e-14);
        assert!(analytic_slit_spectrum(PI / 33.0, &p).norm() < 1e-14);
    }

    #[test]
    fn analytic_spectrum_matches_pixelated_mask() {
        for offset in [23.0, -7.0, 0.0] {
            let p = SlitParams { offset, ..reference_slit() };
            let m = make_double_slit(512, 1, PlaneKind::Near, p).unwrap();
            let peak = analytic_slit_spectrum(0.0, &p).norm();
            for s in -256..256 {
                let q = 2.0 * PI * s as f64 / 512.0;
                let err = (m.continuous_spectrum_x(q) - analytic_slit_spectrum(q, &p)).norm();
                assert!(err <= 1e-6 * peak, "q={q} err={err}");
            }
        }
    }

    #[test]
    fn lattice_spectrum_matches_ff_stage() {
        let g = grid(64, 1, 2);
        let bench = Bench::new(g);
        let p = SlitParams { width: 3.0, separation: 8.0, offset: 2.0, phase: false };
        let mask = make_double_slit(64, 1, PlaneKind::Near, p).unwrap();
        let mut f = FieldLattice { grid: g, data: vec![C64::new(1.0, 0.0); g.len()], domain: Domain::Position, plane: near(&g) };
        bench.apply_object(&mut f, &mask).unwrap();
        bench.apply_ff(&mut f, &lens()).unwrap();
        for m in 0..64 {
            let q = far_coord(m, 64) * 2.0 * PI / 64.0;
            // Constant field of amplitude 1 over nt slices: each slice is T itself.
            let want = C64::new(0.0, -1.0) * mask.spectrum_x(q);
            assert_abs_diff_eq!((f.data[m] - want).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lattice_spectrum_is_antiperiodic() {
        let p = SlitParams { width: 3.0, separation: 8.0, offset: 2.0, phase: true };
        let m = make_double_slit(64, 1, PlaneKind::Near, p).unwrap();
        for q in [0.1, 1.3, -2.0] {
            assert_abs_diff_eq!((m.spectrum_x(q + 2.0 * PI) + m.spectrum_x(q)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ff_preserves_power_and_rescales_plane() {
        let g = grid(32, 8, 4);
        let bench = Bench::new(g);
        let mut f = random_field(g, 1);
        let p0 = f.total_power();
        bench.apply_ff(&mut f, &lens()).unwrap();
        assert_abs_diff_eq!(f.total_power(), p0, epsilon = 1e-10 * p0);
        assert_eq!(f.plane.kind, PlaneKind::Far);
        let l = lens();
        let pitch_in = g.dx * 1.0e-5;
        let want = 2.0 * PI * l.focal_length / (l.k_vacuum * 32.0 * pitch_in);
        assert_abs_diff_eq!(f.plane.pitch()[0], want, epsilon = 1e-12 * want);
    }

    #[test]
    fn constant_input_focuses_to_origin() {
        let g = grid(32, 1, 1);
        let bench = Bench::new(g);
        let mut f = FieldLattice { grid: g, data: vec![C64::new(1.0, 0.0); 32], domain: Domain::Position, plane: near(&g) };
        bench.apply_ff(&mut f, &lens()).unwrap();
        let peak = f.data.iter().map(|c| c.norm()).enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(peak.0, 16);
        assert_abs_diff_eq!(peak.1, 32f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn double_ff_is_negative_parity() {
        let g = grid(16, 8, 2);
        let bench = Bench::new(g);
        let f0 = random_field(g, 7);
        let mut f = f0.clone();
        bench.apply_ff(&mut f, &lens()).unwrap();
        bench.apply_ff(&mut f, &lens()).unwrap();
        assert_eq!(f.plane.kind, PlaneKind::Near);
        assert_abs_diff_eq!(f.plane.step[0], g.dx, epsilon = 1e-14);
        assert_abs_diff_eq!(f.plane.unit, 1.0e-5, epsilon = 1e-18);
        for it in 0..g.nt {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let a = f.data[g.index(it, iy, ix)];
                    let b = f0.data[g.index(it, g.ny - 1 - iy, g.nx - 1 - ix)];
                    assert_abs_diff_eq!((a + b).norm(), 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gaussian_waist_maps_to_two_over_waist() {
        // Waist 2 x_coh on a fine grid: far-field waist 2/w = 1 in x_f units.
        let g = Grid { nx: 256, ny: 1, nt: 1, dx: 0.1, dy: 1.0, dt: 1.0 };
        let bench = Bench::new(g);
        let w = 2.0;
        let data = (0..256).map(|i| C64::new((-(g.x(i) / w).powi(2)).exp(), 0.0)).collect();
        let mut f = FieldLattice { grid: g, data, domain: Domain::Position, plane: Plane { kind: PlaneKind::Near, step: [0.1, 1.0], unit: 1.0 } };
        bench.apply_ff(&mut f, &Lens { focal_length: 1.0, k_vacuum: 1.0 }).unwrap();
        let peak = f.data[128].norm();
        for m in 0..256 {
            let q = far_coord(m, 256) * f.plane.step[0];
            let want = peak * (-(q * w / 2.0).powi(2)).exp();
            assert_abs_diff_eq!(f.data[m].norm(), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_f_twice_is_telescope_times_phase() {
        let g = grid(16, 4, 2);
        let bench = Bench::new(g);
        let f0 = random_field(g, 3);
        let mut f = f0.clone();
        let l = lens();
        bench.apply_2f2f(&mut f, &l).unwrap();
        assert_abs_diff_eq!(f.total_power(), f0.total_power(), epsilon = 1e-10);
        bench.apply_2f2f(&mut f, &l).unwrap();
        let mut t = f0.clone();
        bench.apply_telescope(&mut t).unwrap();
        let curv = -l.k_vacuum * 1e-10 / l.focal_length;
        for it in 0..g.nt {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let (x, y) = (g.x(ix), g.y(iy));
                    let want = t.data[g.index(it, iy, ix)] * C64::from_polar(1.0, curv * (x * x + y * y));
                    assert_abs_diff_eq!((f.data[g.index(it, iy, ix)] - want).norm(), 0.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn focal_shift_is_unitary_and_cancels_itself() {
        let g = grid(32, 4, 2);
        let bench = Bench::new(g);
        let f0 = random_field(g, 5);
        let mut f = f0.clone();
        bench.apply_focal_shift(&mut f, 0.37).unwrap();
        assert_abs_diff_eq!(f.total_power(), f0.total_power(), epsilon = 1e-10);
        bench.apply_focal_shift(&mut f, -0.37).unwrap();
        for (a, b) in f.data.iter().zip(&f0.data) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimised_focal_shift_cancels_quadratic_gain_phase() {
        let c = Config::reference();
        let s = crate::config::derive_scales(&c.crystal, c.optics.focal_length).unwrap();
        let model = crate::config::ModeModel::new(&c.crystal, &s);
        let e = crate::gain::phase_expansion(&model);
        assert_abs_diff_eq!(e.quadratic_q + s.focal_phase_coefficient(s.focal_shift), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_slit_object_preserves_modulus() {
        let g = grid(64, 1, 2);
        let bench = Bench::new(g);
        let f0 = random_field(g, 9);
        let mut f = f0.clone();
        let p = SlitParams { width: 3.0, separation: 8.0, offset: 2.5, phase: true };
        bench.apply_object(&mut f, &make_double_slit(64, 1, PlaneKind::Near, p).unwrap()).unwrap();
        for (a, b) in f.data.iter().zip(&f0.data) {
            assert_abs_diff_eq!(a.norm(), b.norm(), epsilon = 1e-15);
        }
        let far = make_double_slit(64, 1, PlaneKind::Far, p).unwrap();
        assert!(bench.apply_object(&mut f, &far).is_err());
    }

    #[test]
    fn bitmap_masks() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.pgm");
        image::GrayImage::from_pixel(4, 2, image::Luma([255])).save(&white).unwrap();
        let m = load_bitmap_mask(&white, 4, 2, PlaneKind::Near, Some(0.5), false).unwrap();
        assert!(m.values.iter().all(|v| *v == C64::new(1.0, 0.0)));
        let black = dir.path().join("black.png");
        image::GrayImage::from_pixel(4, 2, image::Luma([0])).save(&black).unwrap();
        let m = load_bitmap_mask(&black, 8, 4, PlaneKind::Near, None, false).unwrap();
        assert!(m.values.iter().all(|v| v.re == 0.0));
        let checker = dir.path().join("checker.png");
        image::GrayImage::from_fn(2, 2, |x, y| image::Luma([if (x + y) % 2 == 0 { 255 } else { 0 }]))
            .save(&checker)
            .unwrap();
        let m = load_bitmap_mask(&checker, 2, 2, PlaneKind::Near, Some(0.5), false).unwrap();
        let v: Vec<f64> = m.values.iter().map(|c| c.re).collect();
        // Top image row (y = 0) is stored last.
        assert_eq!(v, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(load_bitmap_mask(&checker, 1, 2, PlaneKind::Near, None, false).is_err());
        assert!(load_bitmap_mask(&dir.path().join("missing.png"), 4, 4, PlaneKind::Near, None, false).is_err());
    }
}
