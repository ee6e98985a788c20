//! Analytical Jacobians of comprehensive quantities with respect to the
//! stacked joint coordinate series `𝔮 = [q; 𝔮̇_(K)]`.
//!
//! Columns follow [`CoordLayout`]: joints in model order, each slot
//! `[δq | δq̇_0 | … | δq̇_K]`. Velocity and momentum Jacobians of order `K`
//! take inputs of order `K`; force and torque Jacobians of order `K` take
//! inputs of order `K+1`.

use nalgebra::{DMatrix, DMatrixView};

use crate::cmtm::psi_map;
use crate::error::{Error, Result};
use crate::kinodynamics::{dynamics_state, ComprehensiveState, CoordLayout, GravitySpec, JointCoordSeries, MAX_ORDER};
use crate::model::{block_diag_repeat, RobotModel};
use crate::series::DerivSeries;
use crate::spatial::{block_toeplitz, hat6, u_operator, Flavor, Mat6};

/// Jacobian families compared against the finite-difference oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    LinkVelocity,
    LinkMomentum,
    LinkWorldMomentum,
    JointWorldMomentum,
    JointMomentum,
    LinkForce,
    JointForce,
    JointTorque,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::LinkVelocity,
        Family::LinkMomentum,
        Family::LinkWorldMomentum,
        Family::JointWorldMomentum,
        Family::JointMomentum,
        Family::LinkForce,
        Family::JointForce,
        Family::JointTorque,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::LinkVelocity => "link_velocity",
            Family::LinkMomentum => "link_momentum",
            Family::LinkWorldMomentum => "link_world_momentum",
            Family::JointWorldMomentum => "joint_world_momentum",
            Family::JointMomentum => "joint_momentum",
            Family::LinkForce => "link_force",
            Family::JointForce => "joint_force",
            Family::JointTorque => "joint_torque",
        }
    }

    /// Input order minus output order.
    pub fn input_shift(&self) -> usize {
        match self {
            Family::LinkForce | Family::JointForce | Family::JointTorque => 1,
            _ => 0,
        }
    }

    /// Quantity values per body at output order `k`, read from a state of
    /// order `k + input_shift()` with momenta (and forces) computed.
    pub fn values(&self, state: &ComprehensiveState, k: usize) -> Result<Vec<DerivSeries>> {
        let n = state.num_bodies();
        let pick = |v: &[DerivSeries]| -> Result<Vec<DerivSeries>> { v.iter().map(|s| s.truncate(k)).collect() };
        match self {
            Family::LinkVelocity => (0..n).map(|i| state.velocity(i).truncate(k)).collect(),
            Family::LinkMomentum => pick(&state.momenta().link),
            Family::LinkWorldMomentum => pick(&state.momenta().link_world),
            Family::JointWorldMomentum => pick(&state.momenta().joint_world),
            Family::JointMomentum => pick(&state.momenta().joint),
            Family::LinkForce => pick(&state.forces().link),
            Family::JointForce => pick(&state.forces().joint),
            Family::JointTorque => pick(state.torques()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KinematicJacobians {
    pub order: usize,
    pub layout: CoordLayout,
    /// `𝔍^Ψ_{J_i} = Ψ⁻¹ 𝔖`, local to joint `i`'s slot: `6(K+2) × n_i(K+2)`.
    pub joint_tangent: Vec<DMatrix<f64>>,
    /// `𝔍^𝔵_{L_i}`: `6(K+2) × Σ n_j(K+2)`.
    pub link_tangent: Vec<DMatrix<f64>>,
    /// `𝔍^𝔳_{L_i} = 𝔘(ad 𝔳) 𝔍^𝔵`: `6(K+1) × Σ n_j(K+2)`.
    pub link_velocity: Vec<DMatrix<f64>>,
    /// Columns past `link_end[i]` are zero in link-side Jacobians of body `i`.
    pub link_end: Vec<usize>,
    /// Same bound for joint-side (subtree-accumulated) Jacobians.
    pub subtree_end: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MomentumJacobians {
    pub order: usize,
    pub link: Vec<DMatrix<f64>>,
    pub link_world: Vec<DMatrix<f64>>,
    pub joint_world: Vec<DMatrix<f64>>,
    pub joint: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct ForceJacobians {
    /// Output order; inputs have order `order + 1`.
    pub order: usize,
    pub link: Vec<DMatrix<f64>>,
    pub joint: Vec<DMatrix<f64>>,
}

/// `out += α T b` for the lower-triangular block Toeplitz `T` with diagonals
/// `blocks`; only the first `end` columns of `b` can be nonzero.
fn toeplitz_acc(out: &mut DMatrix<f64>, alpha: f64, blocks: &[Mat6], b: DMatrixView<'_, f64>, end: usize) {
    let r = out.nrows();
    let t = block_toeplitz(&blocks[..r / 6]);
    out.columns_mut(0, end).gemm(alpha, &t, &b.view((0, 0), (r, end)), 1.0);
}

/// `out += 𝔘(u) b`.
fn u_acc(out: &mut DMatrix<f64>, u: &DerivSeries, flavor: Flavor, b: DMatrixView<'_, f64>, end: usize) {
    let op = u_operator(u, flavor);
    out.columns_mut(0, end).gemm(1.0, &op, &b.view((0, 0), (op.ncols(), end)), 1.0);
}

fn hats(u: &DerivSeries) -> Vec<Mat6> {
    (0..=u.order()).map(|m| hat6(&u.block6(m), Flavor::Force)).collect()
}

/// Column bounds of link-side (ancestors ∪ self) and joint-side (subtree)
/// Jacobians. Ancestors precede descendants in model order.
fn column_ends(model: &RobotModel, layout: &CoordLayout) -> (Vec<usize>, Vec<usize>) {
    let n = model.num_bodies();
    let link: Vec<usize> = (0..n).map(|i| layout.offset(i) + layout.width(i)).collect();
    let subtree = (0..n)
        .map(|i| model.descendants[i].iter().map(|&d| link[d]).fold(link[i], usize::max))
        .collect();
    (link, subtree)
}

fn require_order(state: &ComprehensiveState, k: usize) -> Result<()> {
    if state.order() < k {
        return Err(Error::Order(format!(
            "state of order {} cannot supply Jacobians of input order {k}",
            state.order()
        )));
    }
    Ok(())
}

pub fn velocity_jacobians(model: &RobotModel, state: &ComprehensiveState, k: usize) -> Result<KinematicJacobians> {
    require_order(state, k)?;
    let layout = CoordLayout::new(model.dofs(), k);
    let cols = layout.total();
    let n = model.num_bodies();
    let rows = 6 * (k + 2);
    let (link_end, subtree_end) = column_ends(model, &layout);
    let ends = &link_end;
    let mut joint_tangent = Vec::with_capacity(n);
    let mut link_tangent: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut link_velocity = Vec::with_capacity(n);
    for i in 0..n {
        let vj = state.joint_velocity(i).truncate(k)?;
        let s = block_diag_repeat(&model.joints[i].joint_type.selection(), k + 2);
        let jpsi = psi_map(&vj).inverse() * s;
        let mut jx = DMatrix::zeros(rows, cols);
        if let Some(p) = model.parent[i] {
            let rel_inv = state.relative[i].inverse_blocks(k + 2);
            toeplitz_acc(&mut jx, 1.0, &rel_inv, link_tangent[p].as_view(), ends[p]);
        }
        let off = layout.offset(i);
        let mut slot = jx.view_mut((0, off), (rows, jpsi.ncols()));
        slot += &jpsi;
        let mut jv = DMatrix::zeros(rows - 6, cols);
        u_acc(&mut jv, &state.velocity(i).truncate(k)?, Flavor::Motion, jx.as_view(), ends[i]);
        link_velocity.push(jv);
        link_tangent.push(jx);
        joint_tangent.push(jpsi);
    }
    Ok(KinematicJacobians {
        order: k,
        layout,
        joint_tangent,
        link_tangent,
        link_velocity,
        link_end,
        subtree_end,
    })
}

pub fn momentum_jacobians(
    model: &RobotModel,
    state: &ComprehensiveState,
    kin: &KinematicJacobians,
) -> Result<MomentumJacobians> {
    let k = kin.order;
    require_order(state, k)?;
    let mom = state
        .momenta
        .as_ref()
        .ok_or_else(|| Error::Order("momentum Jacobians need computed momenta".into()))?;
    let n = model.num_bodies();
    let d = 6 * (k + 1);
    let (le, se) = (&kin.link_end, &kin.subtree_end);
    let mut link = Vec::with_capacity(n);
    let mut link_world = Vec::with_capacity(n);
    let mut world_inv = Vec::with_capacity(n);
    for i in 0..n {
        let cols = kin.layout.total();
        let jv = &kin.link_velocity[i];
        let mut jh = DMatrix::zeros(d, cols);
        let inertia = block_diag_repeat(&DMatrix::from_column_slice(6, 6, model.inertia[i].as_slice()), k + 1);
        jh.columns_mut(0, le[i]).gemm(1.0, &inertia, &jv.columns(0, le[i]), 0.0);
        let wf = state.world[i].with_flavor(Flavor::Force);
        let mut inner = jh.clone();
        toeplitz_acc(&mut inner, 1.0, &hats(&mom.link[i].truncate(k)?), kin.link_tangent[i].as_view(), le[i]);
        let mut jwh = DMatrix::zeros(d, cols);
        toeplitz_acc(&mut jwh, 1.0, &wf.blocks(k + 1), inner.as_view(), le[i]);
        link.push(jh);
        link_world.push(jwh);
        world_inv.push(wf.inverse_blocks(k + 1));
    }
    let mut joint_world = link_world.clone();
    for i in (0..n).rev() {
        if let Some(p) = model.parent[i] {
            // p < i, so the split keeps the parent on the left.
            let (head, tail) = joint_world.split_at_mut(i);
            let e = kin.subtree_end[i];
            let mut dst = head[p].columns_mut(0, e);
            dst += tail[0].columns(0, e);
        }
    }
    let mut joint = Vec::with_capacity(n);
    for i in 0..n {
        let mut jh = DMatrix::zeros(d, kin.layout.total());
        toeplitz_acc(&mut jh, 1.0, &world_inv[i], joint_world[i].as_view(), se[i]);
        toeplitz_acc(&mut jh, -1.0, &hats(&mom.joint[i].truncate(k)?), kin.link_tangent[i].as_view(), le[i]);
        joint.push(jh);
    }
    Ok(MomentumJacobians {
        order: k,
        link,
        link_world,
        joint_world,
        joint,
    })
}

pub fn force_jacobians(
    state: &ComprehensiveState,
    kin: &KinematicJacobians,
    mom: &MomentumJacobians,
) -> Result<ForceJacobians> {
    let k_in = kin.order;
    if k_in == 0 || mom.order != k_in {
        return Err(Error::Order("force Jacobians need velocity and momentum Jacobians of matching order ≥ 1".into()));
    }
    let k = k_in - 1;
    let m = state
        .momenta
        .as_ref()
        .ok_or_else(|| Error::Order("force Jacobians need computed momenta".into()))?;
    let n = state.num_bodies();
    let d = 6 * (k + 1);
    let (le, se) = (&kin.link_end, &kin.subtree_end);
    let mut link = Vec::with_capacity(n);
    let mut joint = Vec::with_capacity(n);
    for i in 0..n {
        let v = state.velocity(i).truncate(k)?;
        let jv = kin.link_velocity[i].as_view();
        let cols = kin.layout.total();
        let mut jl = DMatrix::zeros(d, cols);
        u_acc(&mut jl, &v, Flavor::Force, mom.link[i].as_view(), le[i]);
        toeplitz_acc(&mut jl, 1.0, &hats(&m.link[i].truncate(k)?), jv, le[i]);
        link.push(jl);
        let mut jj = DMatrix::zeros(d, cols);
        u_acc(&mut jj, &v, Flavor::Force, mom.joint[i].as_view(), se[i]);
        toeplitz_acc(&mut jj, 1.0, &hats(&m.joint[i].truncate(k)?), jv, le[i]);
        joint.push(jj);
    }
    Ok(ForceJacobians { order: k, link, joint })
}

/// `𝔍^𝔱_{J_i} = 𝔖ᵀ 𝔍^𝔣_{J_i}`.
pub fn torque_jacobian(model: &RobotModel, forces: &ForceJacobians) -> Vec<DMatrix<f64>> {
    forces
        .joint
        .iter()
        .enumerate()
        .map(|(i, jf)| block_diag_repeat(&model.joints[i].joint_type.selection(), forces.order + 1).transpose() * jf)
        .collect()
}

/// Basic Jacobian `𝔍̃_{L_i}` with `𝔳_{L_i} = 𝔍̃ 𝔮̇_(K)` (gravity off):
/// block for joint `j ∈ ancestors ∪ self` is `^i𝔛_j 𝔖_j`.
pub fn basic_jacobian(model: &RobotModel, state: &ComprehensiveState, k: usize) -> Result<Vec<DMatrix<f64>>> {
    require_order(state, k)?;
    let dofs = model.dofs();
    let offsets: Vec<usize> = dofs.iter().scan(0, |acc, &d| {
        let o = *acc;
        *acc += d * (k + 1);
        Some(o)
    }).collect();
    let cols: usize = dofs.iter().map(|d| d * (k + 1)).sum();
    let n = model.num_bodies();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut jb = DMatrix::zeros(6 * (k + 1), cols);
        let wi_inv = block_toeplitz(&state.world[i].inverse_blocks(k + 1));
        for j in std::iter::once(i).chain(model.ancestors[i].iter().copied()) {
            let x = &wi_inv * block_toeplitz(&state.world[j].blocks(k + 1));
            let s = block_diag_repeat(&model.joints[j].joint_type.selection(), k + 1);
            let blk = x * s;
            jb.view_mut((0, offsets[j]), blk.shape()).copy_from(&blk);
        }
        out.push(jb);
    }
    Ok(out)
}

/// Jacobian rows `0..6(k+1)` and the columns of a lower input order.
pub fn truncate_jacobian(j: &DMatrix<f64>, layout: &CoordLayout, rows: usize, order: usize) -> DMatrix<f64> {
    let short = layout.with_order(order);
    let mut out = DMatrix::zeros(rows, short.total());
    for q in 0..layout.dofs.len() {
        let w = short.width(q);
        out.view_mut((0, short.offset(q)), (rows, w))
            .copy_from(&j.view((0, layout.offset(q)), (rows, w)));
    }
    out
}

/// All eight families at output order `k_out`.
#[derive(Clone, Debug)]
pub struct JacobianBundle {
    pub k_out: usize,
    /// Layout of velocity/momentum inputs (order `k_out`).
    pub layout: CoordLayout,
    /// Layout of force/torque inputs (order `k_out + 1`).
    pub force_layout: CoordLayout,
    pub link_velocity: Vec<DMatrix<f64>>,
    pub link_momentum: Vec<DMatrix<f64>>,
    pub link_world_momentum: Vec<DMatrix<f64>>,
    pub joint_world_momentum: Vec<DMatrix<f64>>,
    pub joint_momentum: Vec<DMatrix<f64>>,
    pub link_force: Vec<DMatrix<f64>>,
    pub joint_force: Vec<DMatrix<f64>>,
    pub joint_torque: Vec<DMatrix<f64>>,
}

impl JacobianBundle {
    pub fn compute(model: &RobotModel, coords: &JointCoordSeries, gravity: &GravitySpec, k_out: usize) -> Result<Self> {
        if k_out > MAX_ORDER {
            return Err(Error::Order(format!("requested order {k_out} exceeds {MAX_ORDER}")));
        }
        let kj = k_out + 1;
        let state = dynamics_state(model, coords, gravity, kj)?;
        let kin = velocity_jacobians(model, &state, kj)?;
        let mom = momentum_jacobians(model, &state, &kin)?;
        let force = force_jacobians(&state, &kin, &mom)?;
        let torque = torque_jacobian(model, &force);
        let rows = 6 * (k_out + 1);
        let tr = |v: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
            v.iter().map(|j| truncate_jacobian(j, &kin.layout, rows, k_out)).collect()
        };
        Ok(Self {
            k_out,
            layout: kin.layout.with_order(k_out),
            force_layout: kin.layout.clone(),
            link_velocity: tr(&kin.link_velocity),
            link_momentum: tr(&mom.link),
            link_world_momentum: tr(&mom.link_world),
            joint_world_momentum: tr(&mom.joint_world),
            joint_momentum: tr(&mom.joint),
            link_force: force.link,
            joint_force: force.joint,
            joint_torque: torque,
        })
    }

    pub fn family(&self, f: Family) -> &[DMatrix<f64>] {
        match f {
            Family::LinkVelocity => &self.link_velocity,
            Family::LinkMomentum => &self.link_momentum,
            Family::LinkWorldMomentum => &self.link_world_momentum,
            Family::JointWorldMomentum => &self.joint_world_momentum,
            Family::JointMomentum => &self.joint_momentum,
            Family::LinkForce => &self.link_force,
            Family::JointForce => &self.joint_force,
            Family::JointTorque => &self.joint_torque,
        }
    }

    /// All bodies of a family stacked vertically.
    pub fn stacked(&self, f: Family) -> DMatrix<f64> {
        vstack(self.family(f))
    }
}

pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// `J_quantity · ∂𝔮/∂θ`.
pub fn chain_to_spline(j_quantity: &DMatrix<f64>, dq_dtheta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if j_quantity.ncols() != dq_dtheta.nrows() {
        return Err(Error::Dimension(format!(
            "Jacobian has {} columns but ∂𝔮/∂θ has {} rows",
            j_quantity.ncols(),
            dq_dtheta.nrows()
        )));
    }
    Ok(j_quantity * dq_dtheta)
}
