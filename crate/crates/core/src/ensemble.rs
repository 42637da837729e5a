// The simulated pipeline is linear in the vacuum input, so the ensemble mean
// of any bilinear estimator is the sum of its samples over unit inputs times
// the vacuum variance per quadrature. That mean must equal the oracle.

use crate::config::{Config, ConvolutionMode, EstimatorKind, FocalShiftMode, Geometry, LoTemporal, ObjectKind, PhaseRecipe, Propagation};
use crate::experiment::Experiment;
use crate::lattice::C64;
use crate::oracle::{Integration, TemporalMode};

const VACUUM_VARIANCE: f64 = 0.25;

fn small(geometry: Geometry, estimator: EstimatorKind) -> Config {
    let mut c = Config::reference();
    c.grid.nx = 32;
    c.grid.nt = 8;
    c.grid.extent_x = 32.0 * 0.6;
    c.grid.window_t = 8.0;
    c.pump.plane_wave = true;
    c.pump.cw = true;
    c.solver.propagation = Propagation::PlaneWave;
    c.object.kind = ObjectKind::AmplitudeSlit;
    c.object.width = 3.0;
    c.object.separation = 7.0;
    c.object.offset = 2.0;
    if geometry.is_bucket() {
        c.object.kind = ObjectKind::PhaseSlit;
        c.object.offset = 1.5;
    }
    c.experiment.geometry = geometry;
    c.experiment.estimator = estimator;
    c
}

/// Exact mean of the main probe as (real, imag) quadrature maps.
fn exact_mean(e: &Experiment) -> (Vec<f64>, Vec<f64>) {
    let n = e.grid.len();
    let mut re: Option<Vec<f64>> = None;
    let mut im: Option<Vec<f64>> = None;
    for beam in 0..2 {
        for j in 0..n {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut s = vec![C64::default(); n];
                let mut i = vec![C64::default(); n];
                if beam == 0 {
                    s[j] = unit;
                } else {
                    i[j] = unit;
                }
                e.crystal.propagate(&mut s, &mut i).unwrap();
                let out = e.detect(&s, &i).unwrap();
                let add = |acc: &mut Option<Vec<f64>>, v: &[f64]| match acc {
                    Some(a) => a.iter_mut().zip(v).for_each(|(x, y)| *x += VACUUM_VARIANCE * y),
                    None => *acc = Some(v.iter().map(|y| VACUUM_VARIANCE * y).collect()),
                };
                add(&mut re, &out[0][0]);
                add(&mut im, &out[0][1]);
            }
        }
    }
    (re.unwrap(), im.unwrap())
}

fn check(cfg: Config, tol: f64) {
    let tag = format!("{:?}/{:?}", cfg.experiment.geometry, cfg.experiment.estimator);
    let e = Experiment::from_config(cfg).unwrap();
    let (re, im) = exact_mean(&e);
    let probe = e.correlation("main").unwrap();
    let curve = e.oracle_for(probe, TemporalMode::Pulsed, Integration::Lattice, false).unwrap();
    let peak = curve.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(peak > 0.0, "{tag}: oracle vanishes");
    let mut worst = 0.0f64;
    for (k, v) in curve.values.iter().enumerate() {
        worst = worst.max((C64::new(re[k], im[k]) - v).norm() / peak);
    }
    assert!(worst < tol, "{tag}: max deviation {worst:e} of peak");
}

#[test]
fn pointlike_far_fixed() {
    check(small(Geometry::PointlikeFar, EstimatorKind::Fixed), 1e-9);
}

#[test]
fn pointlike_far_scan() {
    let mut c = small(Geometry::PointlikeFar, EstimatorKind::Scan);
    c.experiment.x2 = 8.0;
    check(c, 1e-9);
}

#[test]
fn pointlike_near_telescope() {
    check(small(Geometry::PointlikeNear, EstimatorKind::Fixed), 1e-9);
}

#[test]
fn pointlike_near_two_f() {
    check(small(Geometry::PointlikeNear2f, EstimatorKind::Fixed), 1e-9);
}

#[test]
fn bucket_near() {
    check(small(Geometry::BucketNear, EstimatorKind::Bucket), 1e-9);
}

#[test]
fn bucket_far() {
    check(small(Geometry::BucketFar, EstimatorKind::Bucket), 1e-9);
}

#[test]
fn convolution_both_modes() {
    for mode in [ConvolutionMode::Circular, ConvolutionMode::ZeroPadded] {
        let mut c = small(Geometry::PointlikeFar, EstimatorKind::Convolution);
        c.experiment.convolution = mode;
        check(c, 1e-9);
    }
}

#[test]
fn without_focal_shift_and_with_cw_oscillators() {
    let mut c = small(Geometry::PointlikeNear, EstimatorKind::Fixed);
    c.optics.focal_shift_mode = FocalShiftMode::None;
    c.lo.idler.recipe = PhaseRecipe::Plain;
    c.lo.signal.temporal = LoTemporal::Cw;
    c.lo.idler.temporal = LoTemporal::Cw;
    check(c, 1e-9);
}
