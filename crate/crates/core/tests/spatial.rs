mod common;

use common::*;
use hodyn::harness::random::rng;
use hodyn::series::DerivSeries;
use hodyn::spatial::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-10.0..10.0f64).prop_map(|a| Vec3::from_column_slice(&a))
}

fn v6() -> impl Strategy<Value = Vec6> {
    prop::collection::vec(-5.0..5.0f64, 6).prop_map(|v| Vec6::from_column_slice(&v))
}

fn series(max_order: usize) -> impl Strategy<Value = (DerivSeries, DerivSeries)> {
    (0..=max_order).prop_flat_map(|k| {
        let n = 6 * (k + 1);
        (
            prop::collection::vec(-2.0..2.0f64, n),
            prop::collection::vec(-2.0..2.0f64, n),
        )
            .prop_map(|(a, b)| {
                (
                    DerivSeries::from_vector(6, DVector::from_vec(a)).unwrap(),
                    DerivSeries::from_vector(6, DVector::from_vec(b)).unwrap(),
                )
            })
    })
}

fn transform() -> impl Strategy<Value = SpatialTransform> {
    (v3(), prop::array::uniform3(-3.2..3.2f64))
        .prop_map(|(p, rpy)| SpatialTransform::from_xyz_rpy(&p, &Vec3::from_column_slice(&rpy)))
}

#[test]
fn skew_examples() {
    assert_eq!(skew3(&Vec3::zeros()), Mat3::zeros());
    let ez = skew3(&Vec3::z());
    assert_eq!(ez, Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    assert_eq!(ez * Vec3::x(), Vec3::y());
    assert_eq!(skew3(&Vec3::new(1.0, 2.0, 3.0)) * Vec3::new(4.0, 5.0, 6.0), Vec3::new(-3.0, 6.0, -3.0));
}

#[test]
fn cross_operator_examples() {
    assert_eq!(cross_motion(&Vec6::zeros()), Mat6::zeros());
    let w = Vec3::new(0.3, -1.2, 2.0);
    let c = cross_motion(&vec6(&w, &Vec3::zeros()));
    let mut expect = Mat6::zeros();
    expect.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew3(&w));
    expect.fixed_view_mut::<3, 3>(3, 3).copy_from(&skew3(&w));
    assert_eq!(c, expect);
    let u = Vec6::new(1.0, -2.0, 0.5, 3.0, 0.1, -0.7);
    assert!((cross_motion(&u) * u).amax() < 1e-15);
    assert_eq!(cross6(&u, Flavor::Force), cross_force(&u));
}

#[test]
fn stacked_cross_reduces_and_is_toeplitz() {
    let mut r = rng(1);
    let s0 = random_series(&mut r, 0);
    let m0 = stacked_cross(&s0, Flavor::Motion, false);
    assert_eq!(m0, DMatrix::from_column_slice(6, 6, cross_motion(&s0.block6(0)).as_slice()));
    let s2 = random_series(&mut r, 2);
    let m2 = stacked_cross(&s2, Flavor::Motion, false);
    for l in 0..3 {
        for m in 0..3 {
            let b = m2.fixed_view::<6, 6>(6 * l, 6 * m).into_owned();
            if m > l {
                assert_eq!(b, Mat6::zeros());
            } else {
                assert_eq!(b, cross_motion(&s2.block6(l - m)));
            }
        }
    }
}

#[test]
fn stacked_commutator_identity() {
    let mut r = rng(7);
    for i in 0..20 {
        let k = i % 5;
        let a = random_series(&mut r, k);
        let b = random_series(&mut r, k);
        let ca = stacked_cross(&a, Flavor::Motion, false);
        let cb = stacked_cross(&b, Flavor::Motion, false);
        let ab = DerivSeries::from_vector(6, &ca * b.as_vector()).unwrap();
        let lhs = &ca * &cb - &cb * &ca;
        let rhs = stacked_cross(&ab, Flavor::Motion, false);
        assert!(max_abs(&(lhs - rhs)) <= 1e-12);
    }
}

#[test]
fn n_matrix_examples() {
    assert_eq!(n_matrix(0, 6), DMatrix::identity(6, 6));
    assert_eq!(n_matrix(2, 1), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])));
    // Taylor series of sin at 0: 0, 1, 0, -1/6, 0, 1/120; of cos: 1, 0, -1/2, 0, 1/24.
    let sin = DVector::from_vec(vec![0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0]);
    let cos = DVector::from_vec(vec![1.0, 0.0, -0.5, 0.0, 1.0 / 24.0]);
    let shifted = n_matrix(4, 1) * sin.rows(1, 5);
    assert!((shifted - cos).amax() < 1e-16);
}

#[test]
fn u_operator_examples() {
    let zero = DerivSeries::zeros(6, 0);
    let u = u_operator(&zero, Flavor::Force);
    let mut expect = DMatrix::zeros(6, 12);
    expect.view_mut((0, 6), (6, 6)).fill_with_identity();
    assert_eq!(u, expect);
    let h = DVector::from_fn(12, |i, _| i as f64);
    assert_eq!(u * h, DVector::from_fn(6, |i, _| (i + 6) as f64));
    assert_eq!(u_operator(&DerivSeries::zeros(6, 3), Flavor::Motion).shape(), (24, 30));
}

/// Body force from `𝔘(ad* 𝔳) 𝔥` against FD of the world-frame momentum.
#[test]
fn u_operator_matches_world_momentum_rate() {
    let inertia = {
        let link = hodyn::model::LinkSpec {
            id: "b".into(),
            mass: 2.0,
            com: Vec3::new(0.1, -0.2, 0.3),
            inertia: [0.3, 0.5, 0.7, 0.01, -0.02, 0.03],
        };
        hodyn::model::spatial_inertia(&link)
    };
    let t0 = 0.4;
    let nu = twist_series(t0, 1);
    let h = DerivSeries::from_blocks6(&[inertia * nu.block6(0), inertia * nu.block6(1)]);
    let f = u_operator(&nu.truncate(0).unwrap(), Flavor::Force) * h.as_vector();
    let world_h = |t: f64| {
        let m = twist_pose(t).force_matrix() * inertia * twist_nu(t);
        DVector::from_column_slice(m.as_slice())
    };
    let dwh = hodyn::harness::fd::time_derivative(world_h, t0, 1, 1e-3);
    let back = twist_pose(t0).force_matrix().try_inverse().unwrap() * Vec6::from_column_slice(dwh.as_slice());
    assert!((f - DVector::from_column_slice(back.as_slice())).amax() <= 1e-6);
}

#[test]
fn frame_transform_examples() {
    let (a, af) = SpatialTransform::identity().frame_transforms();
    assert_eq!(a, Mat6::identity());
    assert_eq!(af, Mat6::identity());
    let p = Vec3::x();
    let f = Vec3::new(0.0, 2.0, -1.0);
    let out = SpatialTransform::from_translation(p).force_matrix() * vec6(&Vec3::zeros(), &f);
    assert_eq!(out, vec6(&p.cross(&f), &f));
    let mut r = rng(3);
    for _ in 0..50 {
        let (a, af) = random_transform(&mut r).frame_transforms();
        assert!((af * a.transpose() - Mat6::identity()).amax() <= 1e-12);
    }
}

#[test]
fn rejects_improper_rotation() {
    let bad = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
    assert!(SpatialTransform::new(bad, Vec3::zeros()).is_err());
    assert!(SpatialTransform::new(Mat3::identity() * 1.01, Vec3::zeros()).is_err());
}

proptest! {
    #[test]
    fn skew_is_antisymmetric(v in v3(), w in v3()) {
        let s = skew3(&v);
        prop_assert_eq!(s.transpose(), -s);
        prop_assert!((s * w - v.cross(&w)).amax() <= 1e-12);
    }

    #[test]
    fn force_cross_is_negative_transpose(u in v6()) {
        prop_assert_eq!(cross_force(&u), -cross_motion(&u).transpose());
    }

    #[test]
    fn hat_swap((x, y) in series(4), force in any::<bool>()) {
        let fl = if force { Flavor::Force } else { Flavor::Motion };
        let lhs = stacked_cross(&x, fl, true) * y.as_vector();
        let rhs = stacked_cross(&y, fl, false) * x.as_vector();
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn stacked_cross_is_exactly_toeplitz((x, _) in series(4)) {
        let m = stacked_cross(&x, Flavor::Motion, false);
        let n = x.order() + 1;
        for l in 0..n {
            for c in 0..n {
                let b = m.fixed_view::<6, 6>(6 * l, 6 * c).into_owned();
                if c > l {
                    prop_assert_eq!(b, Mat6::zeros());
                } else {
                    prop_assert_eq!(b, m.fixed_view::<6, 6>(6 * (l - c), 0).into_owned());
                }
            }
        }
    }

    #[test]
    fn force_transform_is_inverse_transpose(x in transform()) {
        let (a, af) = x.frame_transforms();
        let inv_t = a.try_inverse().unwrap().transpose();
        prop_assert!((af - inv_t).amax() <= 1e-12);
    }

    #[test]
    fn transform_compose_matches_matrices(a in transform(), b in transform()) {
        let ab = a.compose(&b);
        prop_assert!((ab.motion_matrix() - a.motion_matrix() * b.motion_matrix()).amax() <= 1e-12);
        prop_assert!((a.compose(&a.inverse()).motion_matrix() - Mat6::identity()).amax() <= 1e-12);
    }
}
