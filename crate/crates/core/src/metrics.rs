//! Comparison metrics between estimates and references.

use crate::lattice::C64;

/// `||a - b|| / ||b||` over the points where `mask` is set (all if `None`).
pub fn relative_l2(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    let keep = |i: usize| mask.map(|m| m[i]).unwrap_or(true);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..a.len().min(b.len()) {
        if keep(i) {
            num += (a[i] - b[i]).powi(2);
            den += b[i] * b[i];
        }
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

pub fn relative_l2_complex(a: &[C64], b: &[C64], mask: Option<&[bool]>) -> f64 {
    let keep = |i: usize| mask.map(|m| m[i]).unwrap_or(true);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..a.len().min(b.len()) {
        if keep(i) {
            num += (a[i] - b[i]).norm_sqr();
            den += b[i].norm_sqr();
        }
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

/// Largest modulus of a quadrature pair, used as a common normalisation for
/// both quadratures.
pub fn complex_peak(re: &[f64], im: &[f64]) -> f64 {
    re.iter().zip(im).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
}

/// Divide both quadratures by their common peak modulus.
pub fn peak_normalise_pair(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = complex_peak(re, im);
    let s = if p > 0.0 { 1.0 / p } else { 1.0 };
    (re.iter().map(|v| v * s).collect(), im.iter().map(|v| v * s).collect())
}

pub fn peak_normalise(v: &[f64]) -> Vec<f64> {
    let p = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let s = if p > 0.0 { 1.0 / p } else { 1.0 };
    v.iter().map(|x| x * s).collect()
}

pub fn peak_normalise_complex(v: &[C64]) -> Vec<C64> {
    let p = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let s = if p > 0.0 { 1.0 / p } else { 1.0 };
    v.iter().map(|x| x * s).collect()
}

/// Least-squares scale `s` minimising `||s a - b||` over the mask.
pub fn best_scale(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    let keep = |i: usize| mask.map(|m| m[i]).unwrap_or(true);
    let (mut ab, mut aa) = (0.0, 0.0);
    for i in 0..a.len().min(b.len()) {
        if keep(i) {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
        }
    }
    if aa > 0.0 {
        ab / aa
    } else {
        0.0
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Min-max rescale to `[0, 1]`.
pub fn rescale_unit(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Mean structural similarity of two images in `[0, 1]`, computed over
/// 7x7 windows with the usual constants for unit dynamic range.
pub fn ssim(a: &[f64], b: &[f64], nx: usize, ny: usize) -> f64 {
    assert_eq!(a.len(), nx * ny);
    assert_eq!(b.len(), nx * ny);
    const WIN: usize = 7;
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (wx, wy) = (WIN.min(nx), WIN.min(ny));
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=ny - wy {
        for x0 in 0..=nx - wx {
            let n = (wx * wy) as f64;
            let (mut ma, mut mb) = (0.0, 0.0);
            for y in y0..y0 + wy {
                for x in x0..x0 + wx {
                    ma += a[y * nx + x];
                    mb += b[y * nx + x];
                }
            }
            ma /= n;
            mb /= n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in y0..y0 + wy {
                for x in x0..x0 + wx {
                    let (da, db) = (a[y * nx + x] - ma, b[y * nx + x] - mb);
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            let d = (n - 1.0).max(1.0);
            va /= d;
            vb /= d;
            cov /= d;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_l2(&[1.0, 2.0], &[1.0, 2.0], None), 0.0);
        assert_abs_diff_eq!(relative_l2(&[0.0, 0.0], &[3.0, 4.0], None), 1.0);
        assert_abs_diff_eq!(relative_l2(&[1.0, 9.0], &[1.0, 0.0], Some(&[true, false])), 0.0);
        assert!(relative_l2(&[1.0], &[0.0], None).is_infinite());
    }

    #[test]
    fn pair_normalisation_uses_common_peak() {
        let (re, im) = peak_normalise_pair(&[3.0, 0.0], &[4.0, 1.0]);
        assert_abs_diff_eq!(re[0], 0.6);
        assert_abs_diff_eq!(im[0], 0.8);
        assert_abs_diff_eq!(im[1], 0.2);
    }

    #[test]
    fn correlation_and_scale() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        assert_abs_diff_eq!(pearson(&a, &b), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(best_scale(&a, &b, None), 2.0, epsilon = 1e-12);
        let c = [4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(pearson(&a, &c), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let img: Vec<f64> = (0..256).map(|i| ((i * 7) % 13) as f64 / 13.0).collect();
        assert_abs_diff_eq!(ssim(&img, &img, 16, 16), 1.0, epsilon = 1e-12);
        let inv: Vec<f64> = img.iter().map(|v| 1.0 - v).collect();
        assert!(ssim(&img, &inv, 16, 16) < 0.2);
    }

    #[test]
    fn rescale_maps_to_unit_interval() {
        assert_eq!(rescale_unit(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(rescale_unit(&[1.0, 1.0]), vec![0.0, 0.0]);
    }
}
