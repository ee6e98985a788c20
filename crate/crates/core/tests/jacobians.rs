use hodyn::harness::fd::{fd_bundle, FdConfig};
use hodyn::harness::lagrangian::{pendulum_gravity_gradient, PlanarLink};
use hodyn::harness::metric::jacobian_report;
use hodyn::harness::random::{random_chain, random_coords, rng};
use hodyn::jacobians::*;
use hodyn::kinodynamics::*;
use hodyn::model::{JointSpec, JointType, LinkSpec, RobotModel};
use hodyn::series::DerivSeries;
use hodyn::spatial::{stacked_cross, Flavor, SpatialTransform, Vec3};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn gravity() -> GravitySpec {
    GravitySpec::on([0.0, 0.0, -9.81])
}

fn pendulum(mass: f64, com: [f64; 2]) -> RobotModel {
    let links = vec![
        LinkSpec {
            id: "base".into(),
            mass: 1.0,
            com: Vec3::zeros(),
            inertia: [0.1, 0.1, 0.1, 0.0, 0.0, 0.0],
        },
        LinkSpec {
            id: "bob".into(),
            mass,
            com: Vec3::new(com[0], com[1], 0.0),
            inertia: [0.2, 0.2, 0.3, 0.0, 0.0, 0.0],
        },
    ];
    let joints = vec![JointSpec {
        id: "pivot".into(),
        parent: "base".into(),
        child: "bob".into(),
        joint_type: JointType::Revolute { axis: 2 },
        fixed: SpatialTransform::identity(),
    }];
    RobotModel::from_parts("pendulum", links, joints, "base").unwrap()
}

#[test]
fn random_chains_match_fd_oracle() {
    let cfg = FdConfig::default();
    for dof in [3, 7] {
        for seed in 0..5 {
            let model = random_chain(dof, seed);
            for k in [0, 1, 3, 4] {
                let coords = random_coords(&model, k + 1, seed);
                for r in jacobian_report(&model, &coords, &gravity(), k, &cfg).unwrap() {
                    assert!(r.within(1e-5), "dof {dof} seed {seed} {r:?}");
                }
            }
        }
    }
}

#[test]
fn single_joint_at_rest() {
    let model = pendulum(2.0, [0.5, 0.0]);
    let coords = JointCoordSeries::zeros(model.dofs(), 2);
    let b = JacobianBundle::compute(&model, &coords, &GravitySpec::off(), 1).unwrap();
    let jv = &b.link_velocity[0];
    assert_eq!(jv.shape(), (12, 3));
    let mut expect = DMatrix::zeros(12, 3);
    expect[(2, 1)] = 1.0;
    expect[(8, 2)] = 1.0;
    assert!((jv - expect).amax() < 1e-15);
}

#[test]
fn directional_derivatives_match_fd() {
    let model = random_chain(7, 21);
    let k = 2;
    let coords = random_coords(&model, k + 1, 21);
    let g = gravity();
    let b = JacobianBundle::compute(&model, &coords, &g, k).unwrap();
    let jv = vstack(&b.link_velocity);
    let jf = &b.joint_force[0];
    let keep = coords.layout().truncated_columns(k);
    let values = |c: &JointCoordSeries| {
        let st = dynamics_state(&model, c, &g, k + 1).unwrap();
        let v = stack_series(&Family::LinkVelocity.values(&st, k).unwrap());
        let f = st.forces().joint[0].as_vector().clone();
        (v, f)
    };
    let mut r = rng(5);
    let eps = 1e-6;
    for _ in 0..20 {
        let dir = DVector::from_fn(coords.layout().total(), |_, _| r.random_range(-1.0..1.0));
        let shift = |s: f64| {
            JointCoordSeries::from_vector(coords.layout().clone(), coords.as_vector() + &dir * s).unwrap()
        };
        let (vp, fp) = values(&shift(eps));
        let (vm, fm) = values(&shift(-eps));
        let dv = (vp - vm) / (2.0 * eps);
        let df = (fp - fm) / (2.0 * eps);
        let dir_v = DVector::from_iterator(keep.len(), keep.iter().map(|&c| dir[c]));
        let ev = (&jv * dir_v - &dv).amax() / dv.amax();
        let ef = (jf * &dir - &df).amax() / df.amax();
        assert!(ev <= 1e-5 && ef <= 1e-5, "{ev} {ef}");
    }
}

#[test]
fn world_and_local_momentum_jacobians_agree() {
    for seed in 0..3 {
        for k in 0..=3 {
            let model = random_chain(5, seed);
            let coords = random_coords(&model, k, seed);
            let st = dynamics_state(&model, &coords, &gravity(), k).unwrap();
            let kin = velocity_jacobians(&model, &st, k).unwrap();
            let mom = momentum_jacobians(&model, &st, &kin).unwrap();
            let d = 6 * (k + 1);
            for i in 0..model.num_bodies() {
                let wf = st.world[i].with_flavor(Flavor::Force).matrix_with_blocks(k + 1);
                let h = st.momenta().joint[i].truncate(k).unwrap();
                let hat = stacked_cross(&h, Flavor::Force, true);
                let jx = kin.link_tangent[i].rows(0, d);
                let rebuilt = &wf * (&mom.joint[i] + hat * jx);
                let scale = 1.0 + mom.joint_world[i].amax();
                assert!((rebuilt - &mom.joint_world[i]).amax() <= 1e-10 * scale);
            }
        }
    }
}

#[test]
fn static_chain_reduces_to_inertia_maps() {
    let model = random_chain(4, 2);
    let k = 2;
    let coords = random_coords(&model, k + 1, 2);
    let mut at_rest = coords.clone();
    for j in 0..model.num_bodies() {
        for b in 0..=k + 1 {
            at_rest.set_qd_block(j, b, &[0.0]);
        }
    }
    let st = dynamics_state(&model, &at_rest, &GravitySpec::off(), k + 1).unwrap();
    let kin = velocity_jacobians(&model, &st, k + 1).unwrap();
    let mom = momentum_jacobians(&model, &st, &kin).unwrap();
    let force = force_jacobians(&st, &kin, &mom).unwrap();
    for i in 0..model.num_bodies() {
        let inertia = hodyn::model::block_diag_repeat(&DMatrix::from_column_slice(6, 6, model.inertia[i].as_slice()), k + 2);
        assert!((&inertia * &kin.link_velocity[i] - &mom.link[i]).amax() < 1e-12);
        let wf = st.world[i].with_flavor(Flavor::Force).matrix_with_blocks(k + 2);
        assert!((&wf * &mom.link[i] - &mom.link_world[i]).amax() < 1e-12);
        let u = hodyn::spatial::u_operator(&DerivSeries::zeros(6, k), Flavor::Force);
        assert!((&u * &mom.link[i] - &force.link[i]).amax() < 1e-12);
        assert!((&u * &mom.joint[i] - &force.joint[i]).amax() < 1e-12);
    }
}

#[test]
fn pendulum_torque_gradient_matches_statics() {
    let mut r = rng(3);
    let g = [0.0, -9.81];
    for _ in 0..20 {
        let link = PlanarLink {
            mass: r.random_range(0.5..3.0),
            com: [r.random_range(-0.6..0.6), r.random_range(-0.6..0.6)],
            izz: 0.3,
            length: 1.0,
        };
        let model = pendulum(link.mass, link.com);
        let q = r.random_range(-3.0..3.0);
        let mut coords = JointCoordSeries::zeros(model.dofs(), 1);
        coords.set_q(0, &[q]);
        let b = JacobianBundle::compute(&model, &coords, &GravitySpec::on([g[0], g[1], 0.0]), 0).unwrap();
        let dtau = b.joint_torque[0][(0, 0)];
        let oracle = pendulum_gravity_gradient(&link, q, g);
        assert!((dtau - oracle).abs() <= 1e-8, "{dtau} vs {oracle}");
    }
}

#[test]
fn bundle_dimensions() {
    let model = random_chain(3, 1);
    for k in 0..=3 {
        let coords = random_coords(&model, k + 1, 1);
        let b = JacobianBundle::compute(&model, &coords, &gravity(), k).unwrap();
        for f in Family::ALL {
            for m in b.family(f) {
                let rows = if f == Family::JointTorque { k + 1 } else { 6 * (k + 1) };
                let cols = 3 * (k + 2 + f.input_shift());
                assert_eq!(m.shape(), (rows, cols), "{f:?}");
            }
        }
    }
    let coords = random_coords(&model, 1, 1);
    assert!(JacobianBundle::compute(&model, &coords, &gravity(), 1).is_err());
    assert!(JacobianBundle::compute(&model, &coords, &gravity(), MAX_ORDER + 1).is_err());
}

/// `∂𝔮/∂t` in the layout of order `k`, from coordinates of order `k + 1`.
fn time_tangent(coords: &JointCoordSeries, k: usize) -> DVector<f64> {
    let mut out = Vec::new();
    for j in 0..coords.num_joints() {
        out.push(coords.qd_block(j, 0)[0]);
        for m in 0..=k {
            out.push((m + 1) as f64 * coords.qd_block(j, m + 1)[0]);
        }
    }
    DVector::from_vec(out)
}

#[test]
fn basic_jacobian_agrees_along_time() {
    for seed in 0..4 {
        for k in 0..=3 {
            let model = random_chain(5, seed);
            let coords = random_coords(&model, k + 2, seed);
            let g = GravitySpec::off();
            let st = forward_state(&model, &coords, &g, k + 1).unwrap();
            let kin = velocity_jacobians(&model, &st, k).unwrap();
            let basic = basic_jacobian(&model, &st, k + 1).unwrap();
            let tan = time_tangent(&coords, k);
            let qd: Vec<f64> = (0..model.num_bodies())
                .flat_map(|j| (0..=k + 1).map(move |b| (j, b)))
                .map(|(j, b)| coords.qd_block(j, b)[0])
                .collect();
            let qd = DVector::from_vec(qd);
            for i in 0..model.num_bodies() {
                let v = st.velocity(i).as_vector();
                let scale = 1.0 + v.amax();
                assert!((&basic[i] * &qd - v).amax() <= 1e-10 * scale);
                assert!((&kin.link_tangent[i] * &tan - v).amax() <= 1e-10 * scale);
                let dv = DVector::from_fn(6 * (k + 1), |r, _| ((r / 6) + 1) as f64 * v[r + 6]);
                assert!((&kin.link_velocity[i] * &tan - dv).amax() <= 1e-10 * scale);
            }
            if k >= 1 {
                // The basic Jacobian is not the derivative of 𝔳 with respect to 𝔮̇.
                let small = basic_jacobian(&model, &st, k).unwrap();
                let last = model.num_bodies() - 1;
                let cols: Vec<usize> = (0..model.num_bodies())
                    .flat_map(|j| (1..=k + 1).map(move |b| j * (k + 2) + b))
                    .collect();
                let d_dqd = DMatrix::from_fn(6 * (k + 1), cols.len(), |r, c| kin.link_velocity[last][(r, cols[c])]);
                assert!((small[last].clone() - d_dqd).amax() > 1e-6);
            }
        }
    }
}

#[test]
fn columns_only_reach_descendant_links() {
    let model = random_chain(6, 8);
    let k = 1;
    let coords = random_coords(&model, k + 1, 8);
    let b = JacobianBundle::compute(&model, &coords, &gravity(), k).unwrap();
    let layout = &b.layout;
    for i in 0..model.num_bodies() {
        for j in 0..model.num_bodies() {
            let upstream = j == i || model.ancestors[i].contains(&j);
            let block = b.link_velocity[i].columns(layout.offset(j), layout.width(j)).amax();
            assert_eq!(block > 0.0, upstream, "link {i} joint {j}");
        }
    }
}

#[test]
fn jacobians_are_linear_maps() {
    let model = random_chain(4, 6);
    let coords = random_coords(&model, 3, 6);
    let b = JacobianBundle::compute(&model, &coords, &gravity(), 2).unwrap();
    let mut r = rng(9);
    let j = b.stacked(Family::JointTorque);
    let d1 = DVector::from_fn(j.ncols(), |_, _| r.random_range(-1.0..1.0));
    let d2 = DVector::from_fn(j.ncols(), |_, _| r.random_range(-1.0..1.0));
    let (a, c) = (0.7, -1.3);
    let lhs = &j * (&d1 * a + &d2 * c);
    let rhs = &j * &d1 * a + &j * &d2 * c;
    assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
}

#[test]
fn forward_scheme_is_first_order() {
    let model = random_chain(3, 4);
    let coords = random_coords(&model, 2, 4);
    let b = JacobianBundle::compute(&model, &coords, &gravity(), 1).unwrap();
    let err = |step: f64| {
        let cfg = FdConfig {
            step,
            scheme: hodyn::harness::fd::FdScheme::Forward,
            lie: true,
        };
        let fd = fd_bundle(&model, &coords, &gravity(), 1, &cfg).unwrap();
        (b.stacked(Family::JointTorque) - &fd[&Family::JointTorque]).amax()
    };
    let ratio = err(1e-4) / err(1e-5);
    assert!(ratio > 5.0 && ratio < 20.0, "{ratio}");
}

#[test]
fn spline_chaining_is_linear() {
    let mut r = rng(2);
    let j = DMatrix::from_fn(6, 9, |_, _| r.random_range(-1.0..1.0));
    let d1 = DMatrix::from_fn(9, 4, |_, _| r.random_range(-1.0..1.0));
    let d2 = DMatrix::from_fn(9, 4, |_, _| r.random_range(-1.0..1.0));
    let sum = chain_to_spline(&j, &(&d1 + &d2)).unwrap();
    let parts = chain_to_spline(&j, &d1).unwrap() + chain_to_spline(&j, &d2).unwrap();
    assert!((sum - parts).amax() < 1e-14);
    assert!(chain_to_spline(&j, &DMatrix::zeros(8, 4)).is_err());
}
