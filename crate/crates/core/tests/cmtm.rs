mod common;

use common::*;
use hodyn::cmtm::{psi_inverse_map, psi_map, vee_stacked, velocity_from_blocks, Cmtm};
use hodyn::harness::fd::time_derivative;
use hodyn::harness::random::rng;
use hodyn::series::{factorial, DerivSeries};
use hodyn::spatial::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cm(pose: SpatialTransform, vel: DerivSeries) -> Cmtm {
    Cmtm::new(pose, vel, Flavor::Motion).unwrap()
}

fn random_cmtm(r: &mut rand_chacha::ChaCha8Rng, k: usize, flavor: Flavor) -> Cmtm {
    Cmtm::new(random_transform(r), random_series(r, k), flavor).unwrap()
}

#[test]
fn zero_velocity_blocks_vanish() {
    let mut r = rng(0);
    let x = cm(random_transform(&mut r), DerivSeries::zeros(6, 3));
    let b = x.blocks(4);
    assert_eq!(b[0], x.pose().motion_matrix());
    for blk in &b[1..] {
        assert_eq!(*blk, Mat6::zeros());
    }
}

#[test]
fn constant_twist_blocks_by_hand() {
    let nu = Vec6::new(0.2, -0.5, 1.0, 0.3, 0.0, -1.1);
    let x = cm(SpatialTransform::identity(), DerivSeries::from_blocks6(&[nu, Vec6::zeros()]));
    let b = x.blocks(3);
    let c = cross_motion(&nu);
    assert!((b[1] - c).amax() < 1e-15);
    assert!((b[2] - c * c * 0.5).amax() < 1e-15);
}

#[test]
fn blocks_match_fd_of_analytic_pose() {
    let t0 = 0.3;
    for flavor in [Flavor::Motion, Flavor::Force] {
        for k in 0..=3 {
            let x = Cmtm::new(twist_pose(t0), twist_series(t0, k), flavor).unwrap();
            let fd = pose_blocks_fd(twist_pose, t0, k + 1, flavor);
            for (a, b) in x.blocks(k + 1).iter().zip(&fd) {
                assert!((a - b).amax() <= 1e-5, "K={k} {flavor:?}: {}", (a - b).amax());
            }
        }
    }
}

/// Second analytic trajectory: rotation about y by `sin t`, translation `[t, 0, t²/2]`.
fn second_pose(t: f64) -> SpatialTransform {
    SpatialTransform::new(axis_rotation(1, t.sin()), Vec3::new(t, 0.0, 0.5 * t * t)).unwrap()
}

fn second_nu(t: f64) -> Vec6 {
    let r = axis_rotation(1, t.sin());
    vec6(&(Vec3::y() * t.cos()), &(r.transpose() * Vec3::new(1.0, 0.0, t)))
}

fn second_series(t0: f64, k: usize) -> DerivSeries {
    let f = |t: f64| DVector::from_column_slice(second_nu(t).as_slice());
    let mut blocks = vec![f(t0)];
    for m in 1..=k {
        blocks.push(time_derivative(f, t0, m, 1e-2) / factorial(m));
    }
    DerivSeries::from_blocks(&blocks).unwrap()
}

#[test]
fn composed_chain_matches_fd() {
    let t0 = -0.2;
    for k in 0..=3 {
        let a = cm(twist_pose(t0), twist_series(t0, k));
        let b = cm(second_pose(t0), second_series(t0, k));
        let ab = a.compose(&b).unwrap();
        let fd = pose_blocks_fd(|t| twist_pose(t).compose(&second_pose(t)), t0, k + 1, Flavor::Motion);
        for (x, y) in ab.blocks(k + 1).iter().zip(&fd) {
            assert!((x - y).amax() <= 1e-5);
        }
        assert!((ab.matrix() - a.matrix() * b.matrix()).amax() <= 1e-12);
    }
}

#[test]
fn compose_with_identity_and_inverse() {
    let mut r = rng(4);
    for k in 0..=4 {
        let x = random_cmtm(&mut r, k, Flavor::Motion);
        let xi = x.compose(&Cmtm::identity(k, Flavor::Motion)).unwrap();
        assert!((xi.matrix() - x.matrix()).amax() <= 1e-15);
        let e = x.compose(&x.inverse()).unwrap();
        assert!((e.matrix() - DMatrix::identity(6 * (k + 1), 6 * (k + 1))).amax() <= 1e-12);
        assert!(e.velocity().as_vector().amax() <= 1e-12);
    }
    let a = random_cmtm(&mut r, 1, Flavor::Motion);
    assert!(a.compose(&random_cmtm(&mut r, 2, Flavor::Motion)).is_err());
    assert!(a.compose(&random_cmtm(&mut r, 1, Flavor::Force)).is_err());
}

#[test]
fn inverse_examples() {
    let mut r = rng(5);
    let p = random_transform(&mut r);
    let x = cm(p.clone(), DerivSeries::zeros(6, 2));
    let xi = x.inverse();
    assert!((xi.pose().motion_matrix() - p.inverse().motion_matrix()).amax() <= 1e-15);
    assert_eq!(xi.velocity().as_vector().amax(), 0.0);

    let nu = random_vec6(&mut r);
    let x = cm(SpatialTransform::identity(), DerivSeries::from_blocks6(&[nu, random_vec6(&mut r)]));
    let inv = x.inverse_blocks(2);
    let c = cross_motion(&nu);
    assert!((inv[1] + c).amax() <= 1e-15);
    // The per-block product is not the identity; only the full matrices are inverse.
    let prod = inv[1] * x.blocks(2)[1];
    assert!((prod + c * c).amax() <= 1e-15);
    assert!((prod - Mat6::identity()).amax() > 0.5);

    for i in 0..50 {
        let fl = if i % 2 == 0 { Flavor::Motion } else { Flavor::Force };
        let x = random_cmtm(&mut r, i % 5, fl);
        let n = x.order() + 1;
        let prod = x.matrix() * x.inverse().matrix();
        assert!((prod - DMatrix::identity(6 * n, 6 * n)).amax() <= 1e-12);
        assert!((x.inverse_matrix_with_blocks(n) - x.inverse().matrix()).amax() <= 1e-12);
    }
}

#[test]
fn apply_examples() {
    let mut r = rng(6);
    let v = random_series(&mut r, 3);
    let id = Cmtm::identity(3, Flavor::Motion);
    assert_eq!(id.apply(&v).unwrap().as_vector(), v.as_vector());
    let p = random_transform(&mut r);
    let x = cm(p.clone(), DerivSeries::zeros(6, 3));
    let out = x.apply(&v).unwrap();
    for b in 0..=3 {
        assert!((out.block6(b) - p.motion_matrix() * v.block6(b)).amax() <= 1e-14);
    }
    for _ in 0..20 {
        let a = random_cmtm(&mut r, 3, Flavor::Motion);
        let b = random_cmtm(&mut r, 3, Flavor::Motion);
        let lhs = a.compose(&b).unwrap().apply(&v).unwrap();
        let rhs = a.apply(&b.apply(&v).unwrap()).unwrap();
        assert!((lhs.as_vector() - rhs.as_vector()).amax() <= 1e-12);
        let back = a.apply_inverse(&a.apply(&v).unwrap()).unwrap();
        assert!((back.as_vector() - v.as_vector()).amax() <= 1e-12);
    }
    assert!(x.apply(&DerivSeries::zeros(3, 3)).is_err());
}

#[test]
fn psi_explicit_forms() {
    let mut r = rng(8);
    let nu = random_vec6(&mut r);
    let psi = psi_map(&DerivSeries::from_blocks6(&[nu]));
    let m = psi.matrix();
    assert_eq!(m.shape(), (12, 12));
    assert_eq!(m.fixed_view::<6, 6>(0, 0).into_owned(), Mat6::identity());
    assert_eq!(m.fixed_view::<6, 6>(6, 6).into_owned(), Mat6::identity());
    assert_eq!(m.fixed_view::<6, 6>(6, 0).into_owned(), cross_motion(&nu));
    assert_eq!(m.fixed_view::<6, 6>(0, 6).into_owned(), Mat6::zeros());
    let inv = psi.inverse();
    assert_eq!(inv.fixed_view::<6, 6>(6, 0).into_owned(), -cross_motion(&nu));
    assert_eq!(inv.fixed_view::<6, 6>(6, 6).into_owned(), Mat6::identity());

    let k = 3;
    let z = psi_map(&DerivSeries::zeros(6, k));
    let diag: Vec<f64> = (0..=k + 1).flat_map(|l| std::iter::repeat_n(l.max(1) as f64, 6)).collect();
    assert_eq!(*z.matrix(), DMatrix::from_diagonal(&DVector::from_vec(diag.clone())));
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    assert_eq!(psi_inverse_map(&z), DMatrix::from_diagonal(&DVector::from_vec(inv_diag)));
}

#[test]
fn psi_inverse_sweep() {
    let mut r = rng(9);
    for i in 0..50 {
        let k = i % 5;
        let psi = psi_map(&random_series(&mut r, k));
        let n = 6 * (k + 2);
        let inv = psi.inverse();
        assert!((psi.matrix() * &inv - DMatrix::identity(n, n)).amax() <= 1e-12);
        assert!((&inv * psi.matrix() - DMatrix::identity(n, n)).amax() <= 1e-12);
    }
}

#[test]
fn psi_determinant_is_structural() {
    let mut r = rng(10);
    for k in 0..=4 {
        let psi = psi_map(&random_series(&mut r, k));
        let expect = factorial(k + 1).powi(6);
        let det = psi.matrix().determinant();
        assert!(((det - expect) / expect).abs() <= 1e-10);
    }
}

/// Ψ maps the Taylor series of a right perturbation `A(I + ε[ξ(t)×])` to the
/// variation of the pose and of the velocity series.
#[test]
fn psi_matches_lie_fd_variation() {
    let mut r = rng(11);
    let coeffs: Vec<Vec6> = (0..4).map(|_| random_vec6(&mut r)).collect();
    let xi = |t: f64| coeffs.iter().enumerate().fold(Vec6::zeros(), |acc, (i, c)| acc + c * t.powi(i as i32));
    let xi_dot = |t: f64| {
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .fold(Vec6::zeros(), |acc, (i, c)| acc + c * (i as f64) * t.powi(i as i32 - 1))
    };
    let nu_eps = |t: f64, eps: f64| {
        let a = twist_pose(t).motion_matrix();
        let p = Mat6::identity() + cross_motion(&xi(t)) * eps;
        let m = a * p;
        let m_dot = a * cross_motion(&twist_nu(t)) * p + a * cross_motion(&xi_dot(t)) * eps;
        let c = m.try_inverse().unwrap() * m_dot;
        vee_stacked(&DMatrix::from_column_slice(6, 6, c.as_slice())).block6(0)
    };
    let eps = 1e-4;
    let dnu = |t: f64| DVector::from_column_slice(((nu_eps(t, eps) - nu_eps(t, -eps)) / (2.0 * eps)).as_slice());
    for k in 0..=2 {
        let mut tangent = DVector::zeros(6 * (k + 2));
        for (l, c) in coeffs.iter().enumerate().take(k + 2) {
            tangent.rows_mut(6 * l, 6).copy_from(c);
        }
        let mut expect = DVector::zeros(6 * (k + 2));
        expect.rows_mut(0, 6).copy_from(&xi(0.0));
        for m in 0..=k {
            let b = if m == 0 { dnu(0.0) } else { time_derivative(dnu, 0.0, m, 1e-2) / factorial(m) };
            expect.rows_mut(6 * (m + 1), 6).copy_from(&b);
        }
        let got = psi_map(&twist_series(0.0, k)).apply(&tangent);
        assert!((got - expect).amax() <= 1e-5, "K={k}");
    }
}

/// `[𝔳×] = 𝔛⁻¹ d𝔛/dt` with `d𝔛/dt` built from the next CMTM block by the N shift.
#[test]
fn cross_equals_log_derivative() {
    let mut r = rng(12);
    for k in 0..=4 {
        for flavor in [Flavor::Motion, Flavor::Force] {
            let x = random_cmtm(&mut r, k, flavor);
            let b = x.blocks(k + 2);
            let shifted: Vec<Mat6> = (0..=k).map(|l| b[l + 1] * (l + 1) as f64).collect();
            let dx = block_toeplitz(&shifted);
            let lhs = stacked_cross(x.velocity(), flavor, false);
            let rhs = x.inverse().matrix() * dx;
            assert!((lhs - rhs).amax() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn group_closure_preserves_recurrence(seed in 0u64..1000, k in 0usize..=4) {
        let mut r = rng(seed);
        let a = random_cmtm(&mut r, k, Flavor::Motion);
        let b = random_cmtm(&mut r, k, Flavor::Motion);
        for x in [a.compose(&b).unwrap(), a.inverse()] {
            let blocks = x.blocks(k + 2);
            let vel = velocity_from_blocks(&blocks, Flavor::Motion).unwrap();
            let rebuilt = Cmtm::new(x.pose().clone(), vel, Flavor::Motion).unwrap();
            prop_assert!((rebuilt.matrix() - x.matrix()).amax() <= 1e-12 * x.matrix().amax().max(1.0));
        }
    }

    #[test]
    fn matrix_is_block_lower_triangular(seed in 0u64..1000, k in 0usize..=4) {
        let mut r = rng(seed);
        let x = random_cmtm(&mut r, k, Flavor::Force);
        let m = x.matrix();
        for l in 0..=k {
            prop_assert_eq!(m.fixed_view::<6, 6>(6 * l, 6 * l).into_owned(), x.pose().force_matrix());
            for c in l + 1..=k {
                prop_assert_eq!(m.fixed_view::<6, 6>(6 * l, 6 * c).into_owned(), Mat6::zeros());
            }
        }
    }
}
