//! Seeded random chains and coordinate series for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kinodynamics::JointCoordSeries;
use crate::model::{JointSpec, JointType, LinkSpec, RobotModel};
use crate::spatial::{SpatialTransform, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform3(r: &mut ChaCha8Rng, a: f64) -> Vec3 {
    Vec3::new(r.random_range(-a..a), r.random_range(-a..a), r.random_range(-a..a))
}

fn random_link(r: &mut ChaCha8Rng, id: String) -> LinkSpec {
    let d = [r.random_range(0.05..0.5), r.random_range(0.05..0.5), r.random_range(0.05..0.5)];
    let off = [r.random_range(-0.02..0.02), r.random_range(-0.02..0.02), r.random_range(-0.02..0.02)];
    LinkSpec {
        id,
        mass: r.random_range(0.5..5.0),
        com: uniform3(r, 0.5),
        inertia: [d[0], d[1], d[2], off[0], off[1], off[2]],
    }
}

/// Serial chain of `n` one-DoF joints with random axes, offsets and inertias.
/// Roughly one joint in five is prismatic.
pub fn random_chain(n: usize, seed: u64) -> RobotModel {
    let mut r = rng(seed);
    let mut links = vec![random_link(&mut r, "base".into())];
    let mut joints = Vec::with_capacity(n);
    for i in 0..n {
        let child = format!("link{}", i + 1);
        links.push(random_link(&mut r, child.clone()));
        let axis = r.random_range(0..3);
        let joint_type = if r.random_bool(0.2) {
            JointType::Prismatic { axis }
        } else {
            JointType::Revolute { axis }
        };
        let fixed = SpatialTransform::from_xyz_rpy(&uniform3(&mut r, 0.5), &uniform3(&mut r, std::f64::consts::PI));
        joints.push(JointSpec {
            id: format!("joint{i}"),
            parent: links[i].id.clone(),
            child,
            joint_type,
            fixed,
        });
    }
    RobotModel::from_parts(format!("random{n}_{seed}"), links, joints, "base").expect("random chain is valid")
}

/// Coordinates with every entry uniform in `[-1, 1]`.
pub fn random_coords(model: &RobotModel, order: usize, seed: u64) -> JointCoordSeries {
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut c = JointCoordSeries::zeros(model.dofs(), order);
    let v = c.as_vector().map(|_| r.random_range(-1.0..1.0));
    c = JointCoordSeries::from_vector(c.layout().clone(), v).expect("same layout");
    c
}
