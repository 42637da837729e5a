//! Shot-averaged signal-idler quadrature correlations.
//!
//! Each shot yields one real sample lattice per estimator; samples are
//! accumulated with Welford updates and combined across workers with the
//! Chan et al. pairwise merge, which is order independent up to rounding.

use crate::config::ConvolutionMode;
use crate::error::{Error, Result};
use crate::homodyne::QuadratureMap;
use crate::lattice::{far_to_near_inverse, Axes, Centering, Grid, Plane, PlaneKind, Spectral, C64};
use crate::optics::Lens;
use std::f64::consts::PI;

/// Running mean and sum of squared deviations per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.mean.len(), "sample length mismatch");
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        assert_eq!(other.mean.len(), self.mean.len(), "moment length mismatch");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<Vec<f64>> {
        (self.count >= 2).then(|| self.m2.iter().map(|s| s / (self.count - 1) as f64).collect())
    }

    /// Standard error of the mean per point.
    pub fn std_error(&self) -> Option<Vec<f64>> {
        let n = self.count as f64;
        self.variance().map(|v| v.iter().map(|s| (s / n).sqrt()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorTag {
    /// Signal pixel fixed, idler scanned.
    Fixed,
    /// Idler pixel fixed, signal scanned.
    Scan,
    Bucket,
    Convolution,
}

impl EstimatorTag {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorTag::Fixed => "fixed-x1",
            EstimatorTag::Scan => "scan-x1",
            EstimatorTag::Bucket => "bucket",
            EstimatorTag::Convolution => "convolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Real,
    Imag,
}

impl Quadrature {
    pub fn name(self) -> &'static str {
        match self {
            Quadrature::Real => "real",
            Quadrature::Imag => "imag",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub estimator: EstimatorTag,
    pub quadrature: Quadrature,
    pub nx: usize,
    pub ny: usize,
    /// Plane of the scanned coordinate.
    pub plane: Plane,
    pub moments: RunningMoments,
}

impl CorrelationEstimate {
    pub fn new(estimator: EstimatorTag, quadrature: Quadrature, nx: usize, ny: usize, plane: Plane) -> Self {
        Self { estimator, quadrature, nx, ny, plane, moments: RunningMoments::new(nx * ny) }
    }

    pub fn shots(&self) -> u64 {
        self.moments.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.moments.mean
    }

    pub fn merge(&mut self, other: &CorrelationEstimate) -> Result<()> {
        if other.estimator != self.estimator || other.quadrature != self.quadrature || other.nx != self.nx || other.ny != self.ny {
            return Err(Error::Numeric("cannot merge estimates of different kinds".into()));
        }
        self.moments.merge(&other.moments);
        Ok(())
    }
}

fn same_shape(a: &QuadratureMap, b: &QuadratureMap) -> Result<()> {
    if a.nx != b.nx || a.ny != b.ny {
        return Err(Error::Numeric("signal and idler maps have different shapes".into()));
    }
    Ok(())
}

fn pixel_area(p: &Plane, ny: usize) -> f64 {
    p.step[0] * if ny > 1 { p.step[1] } else { 1.0 }
}

/// `Z1(x1) Z2(x2)` for all idler pixels.
pub fn sample_fixed(z1: &QuadratureMap, z2: &QuadratureMap, pixel: usize) -> Result<Vec<f64>> {
    same_shape(z1, z2)?;
    let a = *z1
        .values
        .get(pixel)
        .ok_or_else(|| Error::Numeric(format!("signal pixel {pixel} outside the grid")))?;
    Ok(z2.values.iter().map(|b| a * b).collect())
}

/// `Z1(x1) Z2(x2)` for all signal pixels at a fixed idler pixel.
pub fn sample_scan(z1: &QuadratureMap, z2: &QuadratureMap, pixel: usize) -> Result<Vec<f64>> {
    same_shape(z1, z2)?;
    let b = *z2
        .values
        .get(pixel)
        .ok_or_else(|| Error::Numeric(format!("idler pixel {pixel} outside the grid")))?;
    Ok(z1.values.iter().map(|a| a * b).collect())
}

/// Bucket signal `sum_x1 Z1(x1) dx1` times `Z2(x2)`.
pub fn sample_bucket(z1: &QuadratureMap, z2: &QuadratureMap) -> Result<Vec<f64>> {
    same_shape(z1, z2)?;
    let bucket: f64 = z1.values.iter().sum::<f64>() * pixel_area(&z1.plane, z1.ny);
    Ok(z2.values.iter().map(|b| bucket * b).collect())
}

/// Offset between the index of a far-field sum coordinate and the index sum.
fn half(n: usize) -> usize {
    if n == 1 {
        0
    } else {
        n / 2
    }
}

/// Spatial-average estimator `sum_x1 Z1(x1) Z2(x - x1) dx1` on far-field
/// grids, evaluated with FFTs.
///
/// In the circular mode a partner coordinate that leaves the grid re-enters
/// from the other side with a sign flip. The lattice spectrum of a near-field
/// object is anti-periodic, so these wrapped pairs carry the same expected
/// correlation as in-grid pairs and every sum coordinate receives the full
/// weight of the gain band. The zero-padded mode keeps only in-grid pairs.
#[derive(Debug)]
pub struct Convolver {
    nx: usize,
    ny: usize,
    mode: ConvolutionMode,
    fft: Spectral,
    twist: Vec<C64>,
}

impl Convolver {
    pub fn new(nx: usize, ny: usize, mode: ConvolutionMode) -> Self {
        let (px, py) = match mode {
            ConvolutionMode::Circular => (nx, ny),
            ConvolutionMode::ZeroPadded => (2 * nx, if ny == 1 { 1 } else { 2 * ny }),
        };
        let fft = Spectral::new(Grid { nx: px, ny: py, nt: 1, dx: 1.0, dy: 1.0, dt: 1.0 });
        let axis_twist = |i: usize, n: usize| if n == 1 { 0.0 } else { PI * i as f64 / n as f64 };
        let twist = match mode {
            ConvolutionMode::Circular => (0..ny)
                .flat_map(|iy| (0..nx).map(move |ix| (iy, ix)))
                .map(|(iy, ix)| C64::from_polar(1.0, axis_twist(ix, nx) + axis_twist(iy, ny)))
                .collect(),
            ConvolutionMode::ZeroPadded => Vec::new(),
        };
        Self { nx, ny, mode, fft, twist }
    }

    pub fn mode(&self) -> ConvolutionMode {
        self.mode
    }

    pub fn convolve(&self, z1: &QuadratureMap, z2: &QuadratureMap) -> Result<Vec<f64>> {
        same_shape(z1, z2)?;
        if z1.plane.kind != PlaneKind::Far || z2.plane.kind != PlaneKind::Far {
            return Err(Error::Numeric("the convolution estimator needs far-field maps in both arms".into()));
        }
        if z1.nx != self.nx || z1.ny != self.ny {
            return Err(Error::Numeric("map shape does not match the convolver".into()));
        }
        let area = pixel_area(&z1.plane, self.ny);
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (half(nx), half(ny));
        let mut out = vec![0.0; nx * ny];
        match self.mode {
            ConvolutionMode::Circular => {
                let mut a: Vec<C64> = z1.values.iter().zip(&self.twist).map(|(v, t)| t * v).collect();
                let mut b: Vec<C64> = z2.values.iter().zip(&self.twist).map(|(v, t)| t * v).collect();
                self.fft.forward(&mut a, Axes::SPATIAL);
                self.fft.forward(&mut b, Axes::SPATIAL);
                for (x, y) in a.iter_mut().zip(&b) {
                    *x *= y;
                }
                self.fft.inverse(&mut a, Axes::SPATIAL);
                let norm = 1.0 / (nx * ny) as f64;
                for sy in 0..ny {
                    let (jy, fy) = wrap(sy + hy, ny);
                    for sx in 0..nx {
                        let (jx, fx) = wrap(sx + hx, nx);
                        let j = jy * nx + jx;
                        let v = (a[j] * self.twist[j].conj()).re * norm;
                        out[sy * nx + sx] = fx * fy * v * area;
                    }
                }
            }
            ConvolutionMode::ZeroPadded => {
                let g = *self.fft.grid();
                let mut a = vec![C64::default(); g.spatial_len()];
                let mut b = vec![C64::default(); g.spatial_len()];
                for iy in 0..ny {
                    for ix in 0..nx {
                        a[iy * g.nx + ix] = C64::new(z1.values[iy * nx + ix], 0.0);
                        b[iy * g.nx + ix] = C64::new(z2.values[iy * nx + ix], 0.0);
                    }
                }
                self.fft.forward(&mut a, Axes::SPATIAL);
                self.fft.forward(&mut b, Axes::SPATIAL);
                for (x, y) in a.iter_mut().zip(&b) {
                    *x *= y;
                }
                self.fft.inverse(&mut a, Axes::SPATIAL);
                let norm = 1.0 / g.spatial_len() as f64;
                for sy in 0..ny {
                    for sx in 0..nx {
                        out[sy * nx + sx] = a[(sy + hy) * g.nx + sx + hx].re * norm * area;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Index `j` folded into `[0, n)` and the anti-periodic sign picked up.
#[inline]
fn wrap(j: usize, n: usize) -> (usize, f64) {
    if n == 1 {
        (0, 1.0)
    } else if j >= n {
        (j - n, -1.0)
    } else {
        (j, 1.0)
    }
}

/// Reference double loop for [`Convolver::convolve`].
pub fn convolve_brute(z1: &QuadratureMap, z2: &QuadratureMap, mode: ConvolutionMode) -> Result<Vec<f64>> {
    same_shape(z1, z2)?;
    let (nx, ny) = (z1.nx, z1.ny);
    let (hx, hy) = (half(nx) as i64, half(ny) as i64);
    let area = pixel_area(&z1.plane, ny);
    let fold = |k: i64, n: usize| -> Option<(usize, f64)> {
        let n = n as i64;
        if (0..n).contains(&k) {
            Some((k as usize, 1.0))
        } else if mode == ConvolutionMode::ZeroPadded || n == 1 {
            None
        } else {
            Some((k.rem_euclid(n) as usize, -1.0))
        }
    };
    let mut out = vec![0.0; nx * ny];
    for sy in 0..ny as i64 {
        for sx in 0..nx as i64 {
            let mut acc = 0.0;
            for y1 in 0..ny as i64 {
                let Some((y2, fy)) = fold(sy + hy - y1, ny) else { continue };
                for x1 in 0..nx as i64 {
                    let Some((x2, fx)) = fold(sx + hx - x1, nx) else { continue };
                    acc += fx * fy * z1.values[(y1 as usize) * nx + x1 as usize] * z2.values[y2 * nx + x2];
                }
            }
            out[(sy as usize) * nx + sx as usize] = acc * area;
        }
    }
    Ok(out)
}

/// Complex near field from the two far-field quadrature estimates: the
/// inverse of the centred unitary transform applied to `p_real + i p_imag`.
pub fn reconstruct_nearfield(
    p_real: &[f64],
    p_imag: &[f64],
    nx: usize,
    ny: usize,
    far: &Plane,
    lens: &Lens,
) -> Result<(Vec<C64>, Plane)> {
    if p_real.len() != p_imag.len() || p_real.len() != nx * ny {
        return Err(Error::Numeric("quadrature estimates have different grids".into()));
    }
    if far.kind != PlaneKind::Far {
        return Err(Error::Numeric("reconstruction expects far-field estimates".into()));
    }
    let g = Grid { nx, ny, nt: 1, dx: 1.0, dy: 1.0, dt: 1.0 };
    let fft = Spectral::new(g);
    let mut data: Vec<C64> = p_real.iter().zip(p_imag).map(|(r, i)| C64::new(*r, *i)).collect();
    far_to_near_inverse(&mut data, &fft, &Centering::new(&g));
    Ok((data, lens.fourier_plane(far, [nx, ny])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub shots: u64,
    /// Per-pixel standard error; `None` below two shots.
    pub std_error: Option<Vec<f64>>,
    /// RMS of the standard error over the region.
    pub noise_floor: Option<f64>,
    /// Relative L2 distance to the reference over the region.
    pub relative_error: Option<f64>,
    /// Largest `|mean - reference| / std_error` over the region.
    pub max_z: Option<f64>,
    /// Shots at which the statistical part of the relative error would reach
    /// the threshold, assuming `1/sqrt(N)` scaling.
    pub shots_to_threshold: Option<f64>,
}

/// Summarise an estimate, optionally against a reference over a region mask.
pub fn convergence_report(
    est: &RunningMoments,
    reference: Option<&[f64]>,
    region: Option<&[bool]>,
    threshold: f64,
) -> ConvergenceReport {
    let n = est.len();
    let inside = |i: usize| region.map(|r| r[i]).unwrap_or(true);
    let se = est.std_error();
    let count = (0..n).filter(|&i| inside(i)).count().max(1) as f64;
    let noise_floor = se.as_ref().map(|s| ((0..n).filter(|&i| inside(i)).map(|i| s[i] * s[i]).sum::<f64>() / count).sqrt());
    let (mut relative_error, mut max_z, mut shots_to_threshold) = (None, None, None);
    if let Some(r) = reference {
        let norm: f64 = (0..n).filter(|&i| inside(i)).map(|i| r[i] * r[i]).sum::<f64>().sqrt();
        let diff: f64 = (0..n).filter(|&i| inside(i)).map(|i| (est.mean[i] - r[i]).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            relative_error = Some(diff / norm);
            if let Some(s) = &se {
                let noise = (0..n).filter(|&i| inside(i)).map(|i| s[i] * s[i]).sum::<f64>().sqrt() / norm;
                shots_to_threshold = Some(est.count as f64 * (noise / threshold).powi(2));
            }
        }
        if let Some(s) = &se {
            max_z = (0..n)
                .filter(|&i| inside(i) && s[i] > 0.0)
                .map(|i| (est.mean[i] - r[i]).abs() / s[i])
                .max_by(f64::total_cmp);
        }
    }
    ConvergenceReport { shots: est.count, std_error: se, noise_floor, relative_error, max_z, shots_to_threshold }
}
