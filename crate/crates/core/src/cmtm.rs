//! Comprehensive motion transformation matrices.
//!
//! A CMTM is stored as a pose `A` and the normalized velocity series
//! `ν_0..ν_K` of `A⁻¹Ȧ`. The matrix is the lower-triangular block Toeplitz
//! operator whose diagonal `ℓ` holds `X_ℓ = A^(ℓ)/ℓ!`, generated by
//!
//! `X_0 = A`, `X_{ℓ+1} = 1/(ℓ+1) Σ_{m≤ℓ} X_{ℓ-m} [ν_m×]`.
//!
//! Block `X_ℓ` only needs `ν_0..ν_{ℓ-1}`, so a velocity series of order `K`
//! supports up to `K+2` blocks. The default matrix has `K+1` blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::DerivSeries;
use crate::spatial::{block_toeplitz, cross6, toeplitz_apply, Flavor, Mat6, SpatialTransform, Vec6};

#[derive(Clone, Debug)]
pub struct Cmtm {
    pose: SpatialTransform,
    vel: DerivSeries,
    flavor: Flavor,
}

impl Cmtm {
    pub fn new(pose: SpatialTransform, vel: DerivSeries, flavor: Flavor) -> Result<Self> {
        if vel.dim() != 6 {
            return Err(Error::Dimension(format!(
                "CMTM velocity series needs 6-dimensional blocks, got {}",
                vel.dim()
            )));
        }
        Ok(Self { pose, vel, flavor })
    }

    pub fn identity(order: usize, flavor: Flavor) -> Self {
        Self {
            pose: SpatialTransform::identity(),
            vel: DerivSeries::zeros(6, order),
            flavor,
        }
    }

    pub fn pose(&self) -> &SpatialTransform {
        &self.pose
    }

    pub fn velocity(&self) -> &DerivSeries {
        &self.vel
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn order(&self) -> usize {
        self.vel.order()
    }

    /// Same pose and velocity, other flavor.
    pub fn with_flavor(&self, flavor: Flavor) -> Self {
        Self {
            pose: self.pose.clone(),
            vel: self.vel.clone(),
            flavor,
        }
    }

    fn check_blocks(&self, n: usize) {
        assert!(
            n >= 1 && n <= self.order() + 2,
            "{n} CMTM blocks requested from a velocity series of order {}",
            self.order()
        );
    }

    fn crosses(&self, n: usize) -> Vec<Mat6> {
        (0..n).map(|m| cross6(&self.vel.block6(m), self.flavor)).collect()
    }

    /// `X_0..X_{n-1}`.
    pub fn blocks(&self, n: usize) -> Vec<Mat6> {
        self.check_blocks(n);
        let c = self.crosses(n - 1);
        let mut x = Vec::with_capacity(n);
        x.push(self.pose.matrix(self.flavor));
        for l in 0..n - 1 {
            let mut acc = Mat6::zeros();
            for m in 0..=l {
                acc += x[l - m] * c[m];
            }
            x.push(acc / (l + 1) as f64);
        }
        x
    }

    /// Diagonal blocks of the inverse matrix:
    /// `X⁻_0 = A⁻¹`, `X⁻_{ℓ+1} = -1/(ℓ+1) Σ_{m≤ℓ} [ν_m×] X⁻_{ℓ-m}`.
    pub fn inverse_blocks(&self, n: usize) -> Vec<Mat6> {
        self.check_blocks(n);
        let c = self.crosses(n - 1);
        let mut y = Vec::with_capacity(n);
        y.push(self.pose.inverse().matrix(self.flavor));
        for l in 0..n - 1 {
            let mut acc = Mat6::zeros();
            for m in 0..=l {
                acc += c[m] * y[l - m];
            }
            y.push(acc / -((l + 1) as f64));
        }
        y
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.matrix_with_blocks(self.order() + 1)
    }

    pub fn matrix_with_blocks(&self, n: usize) -> DMatrix<f64> {
        block_toeplitz(&self.blocks(n))
    }

    pub fn inverse_matrix_with_blocks(&self, n: usize) -> DMatrix<f64> {
        block_toeplitz(&self.inverse_blocks(n))
    }

    /// Chain rule: pose `A_a A_b`, velocity `𝔛_b⁻¹ 𝔳_a + 𝔳_b`.
    pub fn compose(&self, b: &Cmtm) -> Result<Cmtm> {
        if self.order() != b.order() || self.flavor != b.flavor {
            return Err(Error::Order(format!(
                "cannot compose CMTMs of order/flavor {}/{:?} and {}/{:?}",
                self.order(),
                self.flavor,
                b.order(),
                b.flavor
            )));
        }
        let k = self.order();
        let b_inv = b.with_flavor(Flavor::Motion).inverse_blocks(k + 1);
        let moved = toeplitz_apply(&b_inv, &self.vel);
        let vel = DerivSeries::from_vector(6, moved.into_vector() + b.vel.as_vector())?;
        Ok(Cmtm {
            pose: self.pose.compose(&b.pose),
            vel,
            flavor: self.flavor,
        })
    }

    /// Pose `A⁻¹`, velocity `-𝔛 𝔳`.
    pub fn inverse(&self) -> Cmtm {
        let k = self.order();
        let x = self.with_flavor(Flavor::Motion).blocks(k + 1);
        let moved = toeplitz_apply(&x, &self.vel);
        Cmtm {
            pose: self.pose.inverse(),
            vel: DerivSeries::from_vector(6, -moved.into_vector()).expect("6-dim series"),
            flavor: self.flavor,
        }
    }

    /// `matrix(self) · v`, using as many blocks as `v` has.
    pub fn apply(&self, v: &DerivSeries) -> Result<DerivSeries> {
        if v.dim() != 6 || v.order() > self.order() + 1 {
            return Err(Error::Dimension(format!(
                "cannot apply an order-{} CMTM to a series of dim {} and order {}",
                self.order(),
                v.dim(),
                v.order()
            )));
        }
        Ok(toeplitz_apply(&self.blocks(v.order() + 1), v))
    }

    /// `matrix(self)⁻¹ · v`.
    pub fn apply_inverse(&self, v: &DerivSeries) -> Result<DerivSeries> {
        if v.dim() != 6 || v.order() > self.order() + 1 {
            return Err(Error::Dimension(format!(
                "cannot apply an order-{} CMTM inverse to a series of dim {} and order {}",
                self.order(),
                v.dim(),
                v.order()
            )));
        }
        Ok(toeplitz_apply(&self.inverse_blocks(v.order() + 1), v))
    }
}

/// Recovers `ν_0..ν_{n-2}` from CMTM blocks `X_0..X_{n-1}` by inverting the
/// recurrence: `[ν_ℓ×] = X_0⁻¹ ((ℓ+1) X_{ℓ+1} - Σ_{m<ℓ} X_{ℓ-m}[ν_m×])`.
pub fn velocity_from_blocks(blocks: &[Mat6], flavor: Flavor) -> Result<DerivSeries> {
    if blocks.len() < 2 {
        return Err(Error::Order("need at least two CMTM blocks".into()));
    }
    let x0_inv = blocks[0]
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular leading CMTM block".into()))?;
    let mut crosses: Vec<Mat6> = Vec::new();
    let mut nus = Vec::new();
    for l in 0..blocks.len() - 1 {
        let mut rhs = blocks[l + 1] * (l + 1) as f64;
        for m in 0..l {
            rhs -= blocks[l - m] * crosses[m];
        }
        let c = x0_inv * rhs;
        let nu = match flavor {
            Flavor::Motion => Vec6::new(c[(2, 1)], c[(0, 2)], c[(1, 0)], c[(5, 1)], c[(3, 2)], c[(4, 0)]),
            Flavor::Force => Vec6::new(c[(2, 1)], c[(0, 2)], c[(1, 0)], c[(2, 4)], c[(0, 5)], c[(1, 3)]),
        };
        crosses.push(cross6(&nu, flavor));
        nus.push(nu);
    }
    Ok(DerivSeries::from_blocks6(&nus))
}

/// Extracts the series `u` from a motion-flavor stacked cross `[u×]` (first block column).
pub fn vee_stacked(m: &DMatrix<f64>) -> DerivSeries {
    let n = m.nrows() / 6;
    let blocks: Vec<Vec6> = (0..n)
        .map(|l| {
            let b = m.fixed_view::<6, 6>(6 * l, 0);
            Vec6::new(
                0.5 * (b[(2, 1)] - b[(1, 2)]),
                0.5 * (b[(0, 2)] - b[(2, 0)]),
                0.5 * (b[(1, 0)] - b[(0, 1)]),
                0.5 * (b[(5, 1)] - b[(4, 2)]),
                0.5 * (b[(3, 2)] - b[(5, 0)]),
                0.5 * (b[(4, 0)] - b[(3, 1)]),
            )
        })
        .collect();
    DerivSeries::from_blocks6(&blocks)
}

/// The map `Ψ_(K+1)` with `[δa; δ𝔳_(K)] = Ψ 𝔵_(K+1)` for a velocity series of order `K`.
///
/// Block `(0,0)` is `I`, block `(ℓ,ℓ)` is `ℓI`, block `(ℓ,m)` for `m < ℓ` is
/// `[ν_{ℓ-1-m}×]`.
#[derive(Clone, Debug)]
pub struct PsiMap {
    vel: DerivSeries,
    matrix: DMatrix<f64>,
}

pub fn psi_map(vel: &DerivSeries) -> PsiMap {
    assert_eq!(vel.dim(), 6);
    let k = vel.order();
    let n = k + 2;
    let mut m = DMatrix::zeros(6 * n, 6 * n);
    for i in 0..6 {
        m[(i, i)] = 1.0;
    }
    for l in 1..n {
        for i in 0..6 {
            m[(6 * l + i, 6 * l + i)] = l as f64;
        }
        for c in 0..l {
            m.fixed_view_mut::<6, 6>(6 * l, 6 * c)
                .copy_from(&cross6(&vel.block6(l - 1 - c), Flavor::Motion));
        }
    }
    PsiMap {
        vel: vel.clone(),
        matrix: m,
    }
}

impl PsiMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of blocks, `K+2`.
    pub fn blocks(&self) -> usize {
        self.vel.order() + 2
    }

    /// Forward substitution: `Ψ⁻_{ℓm} = -(1/ℓ) Σ_{n=m}^{ℓ-1} [ν_{ℓ-n-1}×] Ψ⁻_{nm}`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.blocks();
        let c: Vec<Mat6> = (0..n - 1)
            .map(|i| cross6(&self.vel.block6(i), Flavor::Motion))
            .collect();
        let mut inv = vec![vec![Mat6::zeros(); n]; n];
        inv[0][0] = Mat6::identity();
        for l in 1..n {
            inv[l][l] = Mat6::identity() / l as f64;
            for m in 0..l {
                let mut acc = Mat6::zeros();
                for k in m..l {
                    acc += c[l - k - 1] * inv[k][m];
                }
                inv[l][m] = acc / -(l as f64);
            }
        }
        let mut out = DMatrix::zeros(6 * n, 6 * n);
        for l in 0..n {
            for m in 0..=l {
                out.fixed_view_mut::<6, 6>(6 * l, 6 * m).copy_from(&inv[l][m]);
            }
        }
        out
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
}

pub fn psi_inverse_map(psi: &PsiMap) -> DMatrix<f64> {
    psi.inverse()
}
