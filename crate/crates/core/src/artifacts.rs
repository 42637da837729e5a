//! Conversion of estimates, oracle curves and reconstructions to array
//! files, and comparison of array files.

use crate::arrayfile::{ArrayFile, ArrayHeader};
use crate::config::{EstimatorKind, Geometry};
use crate::correlator::{reconstruct_nearfield, Quadrature};
use crate::error::{Error, Result};
use crate::experiment::{estimator_tag, Experiment, ProbeResult};
use crate::lattice::PlaneKind;
use crate::optics::Lens;
use crate::oracle::{Integration, OracleCurve, TemporalMode};
use serde::Serialize;
use serde_json::json;

fn stamp(h: &mut ArrayHeader, exp: &Experiment, geometry: Geometry) {
    h.geometry = geometry.tag().into();
    h.seed = exp.cfg.run.seed;
    h.config_hash = exp.cfg.hash();
    h.meta.insert("x_coh_m".into(), json!(exp.scales.x_coh));
    h.meta.insert("x_f_m".into(), json!(exp.scales.x_f));
    h.meta.insert("gain_center".into(), json!(exp.gain_center()));
}

/// Estimate of a correlation probe: both quadratures and their standard errors.
pub fn estimate_array(exp: &Experiment, result: &ProbeResult, geometry: Geometry, estimator: EstimatorKind) -> Result<ArrayFile> {
    let mut h = ArrayHeader::for_plane(
        "estimate",
        &["real", "imag", "real_stderr", "imag_stderr"],
        &result.plane,
        result.nx,
        result.ny,
    );
    stamp(&mut h, exp, geometry);
    h.estimator = Some(estimator_tag(estimator).name().into());
    h.shots = result.shots();
    let nan = vec![f64::NAN; result.nx * result.ny];
    let re = result.component(Quadrature::Real);
    let im = result.component(Quadrature::Imag);
    let se_re = re.std_error().unwrap_or_else(|| nan.clone());
    let se_im = im.std_error().unwrap_or(nan);
    ArrayFile::new(h, &[&re.mean, &im.mean, &se_re, &se_im])
}

pub fn oracle_array(exp: &Experiment, curve: &OracleCurve, estimator: EstimatorKind) -> Result<ArrayFile> {
    let mut h = ArrayHeader::for_plane("oracle", &["real", "imag"], &curve.plane, curve.nx, 1);
    stamp(&mut h, exp, curve.geometry);
    h.estimator = Some(estimator_tag(estimator).name().into());
    h.meta.insert("formula".into(), json!(curve.meta.formula));
    h.meta.insert(
        "integration".into(),
        json!(match curve.meta.integration {
            Integration::Lattice => "lattice",
            Integration::Continuum => "continuum",
        }),
    );
    h.meta.insert(
        "temporal".into(),
        json!(match curve.meta.temporal {
            TemporalMode::Cw => "cw",
            TemporalMode::Pulsed => "pulsed",
        }),
    );
    h.meta.insert("plateau".into(), json!(curve.meta.plateau));
    h.meta.insert("converged".into(), json!(curve.meta.converged));
    h.meta.insert("refinements".into(), json!(curve.meta.refinements));
    let re = curve.quadrature(Quadrature::Real);
    let im = curve.quadrature(Quadrature::Imag);
    ArrayFile::new(h, &[&re, &im])
}

/// Near field recovered from a far-field file holding `real` and `imag`.
pub fn reconstruction_array(far: &ArrayFile, lens: &Lens) -> Result<ArrayFile> {
    let plane = far.header.plane()?;
    if plane.kind != PlaneKind::Far {
        return Err(Error::Comparison("reconstruction needs a far-field file".into()));
    }
    let (re, im) = match (far.component("real"), far.component("imag")) {
        (Some(r), Some(i)) => (r, i),
        _ => return Err(Error::Comparison("file lacks the real and imag components".into())),
    };
    let (nx, ny) = (far.header.nx(), far.header.ny());
    let (field, near) = reconstruct_nearfield(re, im, nx, ny, &plane, lens)?;
    let mut h = ArrayHeader::for_plane("reconstruction", &["real", "imag", "modulus"], &near, nx, ny);
    h.geometry = far.header.geometry.clone();
    h.estimator = far.header.estimator.clone();
    h.shots = far.header.shots;
    h.seed = far.header.seed;
    h.config_hash = far.header.config_hash.clone();
    h.meta = far.header.meta.clone();
    h.meta.insert("source_kind".into(), json!(far.header.kind));
    let re: Vec<f64> = field.iter().map(|c| c.re).collect();
    let im: Vec<f64> = field.iter().map(|c| c.im).collect();
    let m: Vec<f64> = field.iter().map(|c| c.norm()).collect();
    ArrayFile::new(h, &[&re, &im, &m])
}

/// Coordinates of the x axis of a file.
pub fn x_coords(f: &ArrayFile) -> Vec<f64> {
    let a = &f.header.axes[0];
    (0..f.header.nx()).map(|i| a.origin + i as f64 * a.step).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompareOptions {
    /// Inclusive x interval in plane units; the whole grid when `None`.
    pub region: Option<(f64, f64)>,
    pub tolerance: f64,
    /// Compare files made from different configurations.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    /// `||a - b|| / ||b||` of the peak-normalised quadrature pairs.
    pub relative_l2: f64,
    /// `||a - b||` of the peak-normalised pairs.
    pub l2_difference: f64,
    /// Largest `|a - b| / stderr` without normalisation, when the estimate
    /// carries standard errors.
    pub max_z: Option<f64>,
    pub points: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub hash_match: bool,
}

/// Compare an estimate (or any `real`/`imag` file) with a reference file.
pub fn compare_files(est: &ArrayFile, reference: &ArrayFile, opts: &CompareOptions) -> Result<CompareReport> {
    let hash_match = est.header.config_hash == reference.header.config_hash;
    if !hash_match && !opts.force {
        return Err(Error::Comparison(format!(
            "config hashes differ ({} vs {}); pass --force to compare anyway",
            short(&est.header.config_hash),
            short(&reference.header.config_hash)
        )));
    }
    let (he, hr) = (&est.header, &reference.header);
    if he.nx() != hr.nx() || he.ny() != hr.ny() || he.plane != hr.plane {
        return Err(Error::Comparison(format!(
            "grids differ: {} {}x{} vs {} {}x{}",
            he.plane,
            he.nx(),
            he.ny(),
            hr.plane,
            hr.nx(),
            hr.ny()
        )));
    }
    let (sa, sb) = (he.axes[0].step, hr.axes[0].step);
    if (sa - sb).abs() > 1e-9 * sa.abs().max(sb.abs()) {
        return Err(Error::Comparison(format!("grid pitches differ: {sa} vs {sb}")));
    }
    let get = |f: &ArrayFile, name: &str| -> Result<Vec<f64>> {
        f.component(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::Comparison(format!("{} file lacks component {name}", f.header.kind)))
    };
    let (er, ei) = (get(est, "real")?, get(est, "imag")?);
    let (rr, ri) = (get(reference, "real")?, get(reference, "imag")?);
    let nx = he.nx();
    let xs = x_coords(est);
    let mask: Vec<bool> = (0..er.len())
        .map(|i| opts.region.map(|(a, b)| (a..=b).contains(&xs[i % nx])).unwrap_or(true))
        .collect();
    let points = mask.iter().filter(|m| **m).count();
    if points == 0 {
        return Err(Error::Comparison("the comparison region contains no grid points".into()));
    }

    let (ner, nei) = crate::metrics::peak_normalise_pair(&er, &ei);
    let (nrr, nri) = crate::metrics::peak_normalise_pair(&rr, &ri);
    let (mut num, mut den) = (0.0, 0.0);
    for i in (0..er.len()).filter(|&i| mask[i]) {
        num += (ner[i] - nrr[i]).powi(2) + (nei[i] - nri[i]).powi(2);
        den += nrr[i].powi(2) + nri[i].powi(2);
    }
    let relative_l2 = if den > 0.0 { (num / den).sqrt() } else { f64::INFINITY };

    let max_z = match (est.component("real_stderr"), est.component("imag_stderr")) {
        (Some(sr), Some(si)) => {
            let mut z = f64::NAN;
            for i in (0..er.len()).filter(|&i| mask[i]) {
                for (d, s) in [(er[i] - rr[i], sr[i]), (ei[i] - ri[i], si[i])] {
                    if s > 0.0 {
                        z = if z.is_nan() { (d / s).abs() } else { z.max((d / s).abs()) };
                    }
                }
            }
            (!z.is_nan()).then_some(z)
        }
        _ => None,
    };
    Ok(CompareReport {
        relative_l2,
        l2_difference: num.sqrt(),
        max_z,
        points,
        tolerance: opts.tolerance,
        pass: relative_l2 <= opts.tolerance,
        hash_match,
    })
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}
