//! Spatial vector algebra.
//!
//! Six-vectors are stored angular part first: `[w; v]`. Motion vectors
//! transform with `A = [[R, 0], [p̂R, R]]`, force vectors with
//! `A* = [[R, p̂R], [0, R]] = A^{-T}`.
//!
//! The stacked operators act on factorial-normalized derivative series and
//! are materialized as dense block matrices.

use nalgebra::{DMatrix, Matrix3, Matrix6, Rotation3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::series::DerivSeries;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Orthonormality tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Motion,
    Force,
}

pub fn skew3(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn angular(u: &Vec6) -> Vec3 {
    Vec3::new(u[0], u[1], u[2])
}

pub fn linear(u: &Vec6) -> Vec3 {
    Vec3::new(u[3], u[4], u[5])
}

pub fn vec6(angular: &Vec3, linear: &Vec3) -> Vec6 {
    Vec6::new(angular.x, angular.y, angular.z, linear.x, linear.y, linear.z)
}

fn blocks6(tl: &Mat3, tr: &Mat3, bl: &Mat3, br: &Mat3) -> Mat6 {
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(tl);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(tr);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(bl);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(br);
    m
}

/// `[u×] = [[ŵ, 0], [v̂, ŵ]]`.
pub fn cross_motion(u: &Vec6) -> Mat6 {
    let w = skew3(&angular(u));
    let v = skew3(&linear(u));
    blocks6(&w, &Mat3::zeros(), &v, &w)
}

/// `[u×*] = -[u×]ᵀ = [[ŵ, v̂], [0, ŵ]]`.
pub fn cross_force(u: &Vec6) -> Mat6 {
    let w = skew3(&angular(u));
    let v = skew3(&linear(u));
    blocks6(&w, &v, &Mat3::zeros(), &w)
}

pub fn cross6(u: &Vec6, flavor: Flavor) -> Mat6 {
    match flavor {
        Flavor::Motion => cross_motion(u),
        Flavor::Force => cross_force(u),
    }
}

/// `hat6(x)·y = cross6(y)·x`.
pub fn hat6(x: &Vec6, flavor: Flavor) -> Mat6 {
    let xw = skew3(&angular(x));
    let xv = skew3(&linear(x));
    match flavor {
        Flavor::Motion => -cross_motion(x),
        Flavor::Force => blocks6(&(-xw), &(-xv), &(-xv), &Mat3::zeros()),
    }
}

/// Rotation by `angle` about coordinate axis `axis` (0-based).
pub fn axis_rotation(axis: usize, angle: f64) -> Mat3 {
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(e), angle).into_inner()
}

/// Fixed-axis roll-pitch-yaw: `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn rpy_rotation(rpy: &Vec3) -> Mat3 {
    Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z).into_inner()
}

/// Rigid transform `(R, p)`, composing as `(R₁,p₁)(R₂,p₂) = (R₁R₂, R₁p₂ + p₁)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl SpatialTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Mat3::identity()).abs().max();
        let det = rotation.determinant();
        if !ortho.is_finite() || ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::Validation(format!(
                "rotation is not orthonormal with det +1 (|RᵀR-I|={ortho:.3e}, det={det:.6})"
            )));
        }
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("translation has non-finite entries".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_rotation(rotation: Mat3) -> Result<Self> {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    pub fn from_xyz_rpy(xyz: &Vec3, rpy: &Vec3) -> Self {
        Self {
            rotation: rpy_rotation(rpy),
            translation: *xyz,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `A = [[R, 0], [p̂R, R]]`.
    pub fn motion_matrix(&self) -> Mat6 {
        let pr = skew3(&self.translation) * self.rotation;
        blocks6(&self.rotation, &Mat3::zeros(), &pr, &self.rotation)
    }

    /// `A* = [[R, p̂R], [0, R]]`.
    pub fn force_matrix(&self) -> Mat6 {
        let pr = skew3(&self.translation) * self.rotation;
        blocks6(&self.rotation, &pr, &Mat3::zeros(), &self.rotation)
    }

    pub fn matrix(&self, flavor: Flavor) -> Mat6 {
        match flavor {
            Flavor::Motion => self.motion_matrix(),
            Flavor::Force => self.force_matrix(),
        }
    }

    /// Both frame transforms `(A, A*)`.
    pub fn frame_transforms(&self) -> (Mat6, Mat6) {
        (self.motion_matrix(), self.force_matrix())
    }
}

fn require6(series: &DerivSeries) {
    assert_eq!(series.dim(), 6, "spatial series must have 6-dimensional blocks");
}

/// Lower-triangular block Toeplitz matrix with `blocks[d]` on block diagonal `d`.
pub fn block_toeplitz(blocks: &[Mat6]) -> DMatrix<f64> {
    let n = blocks.len();
    let mut out = DMatrix::zeros(6 * n, 6 * n);
    for l in 0..n {
        for m in 0..=l {
            out.fixed_view_mut::<6, 6>(6 * l, 6 * m)
                .copy_from(&blocks[l - m]);
        }
    }
    out
}

/// Block `(ℓ, m)` is `[u_{ℓ-m}×]` (or `×*`); the hat variant `H(x)` satisfies
/// `H(x)·y = stacked_cross(y)·x`.
pub fn stacked_cross(series: &DerivSeries, flavor: Flavor, hat: bool) -> DMatrix<f64> {
    require6(series);
    let blocks: Vec<Mat6> = (0..=series.order())
        .map(|i| {
            let u = series.block6(i);
            if hat {
                hat6(&u, flavor)
            } else {
                cross6(&u, flavor)
            }
        })
        .collect();
    block_toeplitz(&blocks)
}

/// `N_(1:k+1) = blockdiag(1·I_m, 2·I_m, …, (k+1)·I_m)`.
pub fn n_matrix(k: usize, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m * (k + 1), m * (k + 1));
    for l in 0..=k {
        for i in 0..m {
            out[(l * m + i, l * m + i)] = (l + 1) as f64;
        }
    }
    out
}

/// `𝔘 = [stacked_cross(𝔳) | 0] + [0 | N_(1:K+1)]`, shape `6(K+1) × 6(K+2)`.
pub fn u_operator(series: &DerivSeries, flavor: Flavor) -> DMatrix<f64> {
    require6(series);
    let k = series.order();
    let rows = 6 * (k + 1);
    let mut out = DMatrix::zeros(rows, rows + 6);
    out.view_mut((0, 0), (rows, rows))
        .copy_from(&stacked_cross(series, flavor, false));
    for i in 0..rows {
        out[(i, i + 6)] += (i / 6 + 1) as f64;
    }
    out
}

/// Applies the lower-triangular Toeplitz operator with diagonals `blocks`
/// to a 6-dimensional series without materializing it.
pub fn toeplitz_apply(blocks: &[Mat6], v: &DerivSeries) -> DerivSeries {
    require6(v);
    let k = v.order();
    assert!(blocks.len() > k, "not enough operator blocks");
    let mut out = DerivSeries::zeros(6, k);
    for l in 0..=k {
        let mut acc = Vec6::zeros();
        for m in 0..=l {
            acc += blocks[l - m] * v.block6(m);
        }
        out.set_block6(l, &acc);
    }
    out
}

/// `stacked_cross(u)·v` computed blockwise.
pub fn series_cross(u: &DerivSeries, v: &DerivSeries, flavor: Flavor) -> DerivSeries {
    let k = v.order().min(u.order());
    let blocks: Vec<Mat6> = (0..=k).map(|i| cross6(&u.block6(i), flavor)).collect();
    toeplitz_apply(&blocks, &v.truncate(k).expect("order checked"))
}
