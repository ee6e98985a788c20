#![allow(dead_code)]

use hodyn::harness::fd::time_derivative;
use hodyn::series::{factorial, DerivSeries};
use hodyn::spatial::{axis_rotation, vec6, Flavor, Mat3, Mat6, SpatialTransform, Vec3, Vec6};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Angles of the analytic test trajectory `R(t) = Rz(a(t)) Rx(b(t))`.
fn angles(t: f64) -> (f64, f64, f64, f64) {
    let a = 0.7 * t + 0.3 * t * t;
    let b = 0.5 * t - 0.2 * t * t * t;
    (a, 0.7 + 0.6 * t, b, 0.5 - 0.6 * t * t)
}

fn position(t: f64) -> (Vec3, Vec3) {
    (
        Vec3::new(t.sin(), t * t, 0.3 * (2.0 * t).cos()),
        Vec3::new(t.cos(), 2.0 * t, -0.6 * (2.0 * t).sin()),
    )
}

pub fn twist_rotation(t: f64) -> Mat3 {
    let (a, _, b, _) = angles(t);
    axis_rotation(2, a) * axis_rotation(0, b)
}

pub fn twist_pose(t: f64) -> SpatialTransform {
    SpatialTransform::new(twist_rotation(t), position(t).0).unwrap()
}

/// Body-frame spatial velocity of [`twist_pose`], closed form.
pub fn twist_nu(t: f64) -> Vec6 {
    let (_, ad, b, bd) = angles(t);
    let w = axis_rotation(0, b).transpose() * Vec3::z() * ad + Vec3::x() * bd;
    let v = twist_rotation(t).transpose() * position(t).1;
    vec6(&w, &v)
}

/// Normalized velocity series of [`twist_pose`] at `t0` by FD in time.
pub fn twist_series(t0: f64, order: usize) -> DerivSeries {
    let f = |t: f64| DVector::from_column_slice(twist_nu(t).as_slice());
    let mut blocks = vec![f(t0)];
    for m in 1..=order {
        blocks.push(time_derivative(f, t0, m, 1e-2) / factorial(m));
    }
    DerivSeries::from_blocks(&blocks).unwrap()
}

/// `A^(ℓ)(t0)/ℓ!` for `ℓ < n`, by FD in time.
pub fn pose_blocks_fd(pose: impl Fn(f64) -> SpatialTransform, t0: f64, n: usize, flavor: Flavor) -> Vec<Mat6> {
    let f = |t: f64| DVector::from_column_slice(pose(t).matrix(flavor).as_slice());
    (0..n)
        .map(|l| {
            let v = if l == 0 { f(t0) } else { time_derivative(f, t0, l, 1e-2) / factorial(l) };
            Mat6::from_column_slice(v.as_slice())
        })
        .collect()
}

pub fn random_vec6(r: &mut ChaCha8Rng) -> Vec6 {
    Vec6::from_fn(|_, _| r.random_range(-1.0..1.0))
}

pub fn random_series(r: &mut ChaCha8Rng, order: usize) -> DerivSeries {
    let blocks: Vec<Vec6> = (0..=order).map(|_| random_vec6(r)).collect();
    DerivSeries::from_blocks6(&blocks)
}

pub fn random_transform(r: &mut ChaCha8Rng) -> SpatialTransform {
    let xyz = Vec3::from_fn(|_, _| r.random_range(-1.0..1.0));
    let rpy = Vec3::from_fn(|_, _| r.random_range(-3.0..3.0));
    SpatialTransform::from_xyz_rpy(&xyz, &rpy)
}

pub fn max_abs(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.abs().max()
}
