//! Forward comprehensive kinodynamics.
//!
//! The forward pass composes relative CMTMs root to leaf, which also yields
//! the link velocity series `𝔳_i = ^i𝔛_{p(i)} 𝔳_{p(i)} + 𝔖 𝔮̇_i`. Momenta are
//! accumulated in the world frame and mapped back; forces come from
//! `𝔣_(K-1) = 𝔘(ad* 𝔳) 𝔥_(K)`, so they are one order below the state.
//!
//! Gravity enters as a fictitious base motion: the base velocity series has
//! `ν_0 = 0` and first block `[0; -g]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cmtm::Cmtm;
use crate::error::{Error, Result};
use crate::model::{block_diag_repeat, RobotModel};
use crate::series::DerivSeries;
use crate::spatial::{cross_force, u_operator, Flavor, Mat6, SpatialTransform, Vec3, Vec6};

/// Highest derivative order accepted at the API boundary.
pub const MAX_ORDER: usize = 8;

/// Column bookkeeping for stacked joint coordinate series `[q; 𝔮̇_(K)]` per joint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordLayout {
    pub dofs: Vec<usize>,
    pub order: usize,
}

impl CoordLayout {
    pub fn new(dofs: Vec<usize>, order: usize) -> Self {
        Self { dofs, order }
    }

    /// Width of joint `j`'s slot, `n_j (K+2)`.
    pub fn width(&self, j: usize) -> usize {
        self.dofs[j] * (self.order + 2)
    }

    pub fn offset(&self, j: usize) -> usize {
        (0..j).map(|i| self.width(i)).sum()
    }

    pub fn total(&self) -> usize {
        (0..self.dofs.len()).map(|i| self.width(i)).sum()
    }

    /// Column of `q_j[c]` (block 0) or `q̇_j` block `b-1` (block `b ≥ 1`).
    pub fn column(&self, j: usize, block: usize, c: usize) -> usize {
        self.offset(j) + block * self.dofs[j] + c
    }

    pub fn with_order(&self, order: usize) -> Self {
        Self::new(self.dofs.clone(), order)
    }

    /// Column indices of `self` that survive truncation to `order`.
    pub fn truncated_columns(&self, order: usize) -> Vec<usize> {
        let mut cols = Vec::new();
        for j in 0..self.dofs.len() {
            let start = self.offset(j);
            cols.extend(start..start + self.dofs[j] * (order + 2));
        }
        cols
    }
}

/// Per-joint `q` and normalized `q̇` series, packed as `[q; q̇_0; …; q̇_K]` per joint.
#[derive(Clone, Debug, PartialEq)]
pub struct JointCoordSeries {
    layout: CoordLayout,
    data: DVector<f64>,
}

impl JointCoordSeries {
    pub fn zeros(dofs: Vec<usize>, order: usize) -> Self {
        let layout = CoordLayout::new(dofs, order);
        let n = layout.total();
        Self {
            layout,
            data: DVector::zeros(n),
        }
    }

    pub fn from_vector(layout: CoordLayout, data: DVector<f64>) -> Result<Self> {
        if data.len() != layout.total() {
            return Err(Error::Dimension(format!(
                "coordinate vector has length {}, layout needs {}",
                data.len(),
                layout.total()
            )));
        }
        Ok(Self { layout, data })
    }

    /// From per-joint positions and raw derivatives `q̇, q̈, …` (all joints 1-DoF or matching dims).
    pub fn from_raw(dofs: Vec<usize>, q: &[DVector<f64>], raw_rates: &[Vec<DVector<f64>>]) -> Result<Self> {
        let order = raw_rates.first().map(|r| r.len()).unwrap_or(1).saturating_sub(1);
        let mut out = Self::zeros(dofs, order);
        for j in 0..q.len() {
            out.set_q(j, q[j].as_slice());
            let s = DerivSeries::from_raw_derivatives(&raw_rates[j])?;
            for b in 0..=order {
                out.set_qd_block(j, b, s.block(b).as_slice());
            }
        }
        Ok(out)
    }

    pub fn layout(&self) -> &CoordLayout {
        &self.layout
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn num_joints(&self) -> usize {
        self.layout.dofs.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn q(&self, j: usize) -> &[f64] {
        let o = self.layout.offset(j);
        &self.data.as_slice()[o..o + self.layout.dofs[j]]
    }

    pub fn qd_block(&self, j: usize, b: usize) -> &[f64] {
        let o = self.layout.column(j, b + 1, 0);
        &self.data.as_slice()[o..o + self.layout.dofs[j]]
    }

    pub fn qd(&self, j: usize) -> DerivSeries {
        let n = self.layout.dofs[j];
        let o = self.layout.column(j, 1, 0);
        DerivSeries::from_vector(n, self.data.rows(o, n * (self.order() + 1)).into_owned())
            .expect("layout consistent")
    }

    pub fn set_q(&mut self, j: usize, q: &[f64]) {
        let o = self.layout.offset(j);
        self.data.as_mut_slice()[o..o + q.len()].copy_from_slice(q);
    }

    pub fn set_qd_block(&mut self, j: usize, b: usize, v: &[f64]) {
        let o = self.layout.column(j, b + 1, 0);
        self.data.as_mut_slice()[o..o + v.len()].copy_from_slice(v);
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::Order(format!(
                "coordinates of order {} cannot supply order {order}",
                self.order()
            )));
        }
        let cols = self.layout.truncated_columns(order);
        let data = DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.data[c]));
        Ok(Self {
            layout: self.layout.with_order(order),
            data,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GravitySpec {
    pub enabled: bool,
    pub vector: [f64; 3],
}

impl Default for GravitySpec {
    fn default() -> Self {
        Self {
            enabled: false,
            vector: [0.0, 0.0, -9.81],
        }
    }
}

impl GravitySpec {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn on(vector: [f64; 3]) -> Self {
        Self { enabled: true, vector }
    }

    /// Base velocity series: zero velocity, acceleration `[0; -g]`.
    pub fn base_velocity(&self, order: usize) -> DerivSeries {
        let mut s = DerivSeries::zeros(6, order);
        if self.enabled && order >= 1 {
            let g = Vec3::from(self.vector);
            s.set_block6(1, &Vec6::new(0.0, 0.0, 0.0, -g.x, -g.y, -g.z));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct Momenta {
    /// `𝔥_{L_i} = ℑ_i 𝔳_i` (link frame).
    pub link: Vec<DerivSeries>,
    /// `ʷ𝔥_{L_i}`.
    pub link_world: Vec<DerivSeries>,
    /// `ʷ𝔥_{J_i}`, summed over the subtree.
    pub joint_world: Vec<DerivSeries>,
    /// `𝔥_{J_i}` in the joint (child link) frame.
    pub joint: Vec<DerivSeries>,
}

#[derive(Clone, Debug)]
pub struct Forces {
    pub link: Vec<DerivSeries>,
    pub joint: Vec<DerivSeries>,
}

#[derive(Clone, Debug)]
pub struct ComprehensiveState {
    order: usize,
    /// Base link CMTM (identity pose, gravity motion).
    pub base: Cmtm,
    /// `^{p(i)}𝔛_{L_i}`, whose velocity is `𝔖 𝔮̇_i`.
    pub relative: Vec<Cmtm>,
    /// `^w𝔛_{L_i}`, whose velocity is `𝔳_{L_i}`.
    pub world: Vec<Cmtm>,
    pub momenta: Option<Momenta>,
    pub forces: Option<Forces>,
    pub torques: Option<Vec<DerivSeries>>,
}

/// Runs the kinematic pass at order `k_state`.
pub fn forward_state(
    model: &RobotModel,
    coords: &JointCoordSeries,
    gravity: &GravitySpec,
    k_state: usize,
) -> Result<ComprehensiveState> {
    if k_state > MAX_ORDER + 2 {
        return Err(Error::Order(format!("state order {k_state} exceeds {}", MAX_ORDER + 2)));
    }
    if coords.order() < k_state {
        return Err(Error::Order(format!(
            "coordinate series of order {} cannot drive a state of order {k_state}",
            coords.order()
        )));
    }
    if coords.layout().dofs != model.dofs() {
        return Err(Error::Dimension(format!(
            "coordinate dofs {:?} do not match model dofs {:?}",
            coords.layout().dofs,
            model.dofs()
        )));
    }
    let base = Cmtm::new(SpatialTransform::identity(), gravity.base_velocity(k_state), Flavor::Motion)?;
    let n = model.num_bodies();
    let mut relative = Vec::with_capacity(n);
    let mut world: Vec<Cmtm> = Vec::with_capacity(n);
    for (i, joint) in model.joints.iter().enumerate() {
        let jt = &joint.joint_type;
        let pose = joint.fixed.compose(&jt.motion_transform(coords.q(i)));
        let s = jt.selection();
        let mut vel = DerivSeries::zeros(6, k_state);
        for b in 0..=k_state {
            let qd = DVector::from_column_slice(coords.qd_block(i, b));
            vel.set_block(b, &(&s * qd));
        }
        let rel = Cmtm::new(pose, vel, Flavor::Motion)?;
        let parent = match model.parent[i] {
            Some(p) => &world[p],
            None => &base,
        };
        world.push(parent.compose(&rel)?);
        relative.push(rel);
    }
    Ok(ComprehensiveState {
        order: k_state,
        base,
        relative,
        world,
        momenta: None,
        forces: None,
        torques: None,
    })
}

fn inertia_apply(inertia: &Mat6, v: &DerivSeries) -> DerivSeries {
    let mut out = DerivSeries::zeros(6, v.order());
    for b in 0..=v.order() {
        out.set_block6(b, &(inertia * v.block6(b)));
    }
    out
}

/// `𝔘(ad* 𝔳_(K-1)) 𝔥_(K)` computed blockwise.
pub fn momentum_to_force(vel: &DerivSeries, h: &DerivSeries) -> Result<DerivSeries> {
    let k = h.order();
    if k == 0 {
        return Err(Error::Order("forces need momentum series of order at least 1".into()));
    }
    if vel.order() + 1 < k {
        return Err(Error::Order("velocity series too short for the requested force order".into()));
    }
    let mut f = DerivSeries::zeros(6, k - 1);
    for l in 0..k {
        let mut acc = h.block6(l + 1) * (l + 1) as f64;
        for m in 0..=l {
            acc += cross_force(&vel.block6(l - m)) * h.block6(m);
        }
        f.set_block6(l, &acc);
    }
    Ok(f)
}

impl ComprehensiveState {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_bodies(&self) -> usize {
        self.world.len()
    }

    /// `𝔳_{L_i}`.
    pub fn velocity(&self, i: usize) -> &DerivSeries {
        self.world[i].velocity()
    }

    /// `𝔳_{J_i} = 𝔖 𝔮̇_i`.
    pub fn joint_velocity(&self, i: usize) -> &DerivSeries {
        self.relative[i].velocity()
    }

    pub fn compute_momenta(&mut self, model: &RobotModel) -> Result<()> {
        let n = self.num_bodies();
        let link: Vec<DerivSeries> = (0..n)
            .map(|i| inertia_apply(&model.inertia[i], self.velocity(i)))
            .collect();
        let link_world: Vec<DerivSeries> = (0..n)
            .map(|i| self.world[i].with_flavor(Flavor::Force).apply(&link[i]))
            .collect::<Result<_>>()?;
        let mut joint_world = link_world.clone();
        for i in (0..n).rev() {
            if let Some(p) = model.parent[i] {
                let sum = joint_world[p].as_vector() + joint_world[i].as_vector();
                joint_world[p] = DerivSeries::from_vector(6, sum)?;
            }
        }
        let joint: Vec<DerivSeries> = (0..n)
            .map(|i| self.world[i].with_flavor(Flavor::Force).apply_inverse(&joint_world[i]))
            .collect::<Result<_>>()?;
        self.momenta = Some(Momenta {
            link,
            link_world,
            joint_world,
            joint,
        });
        Ok(())
    }

    pub fn compute_forces(&mut self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Order("state of order 0 cannot produce forces".into()));
        }
        let m = self
            .momenta
            .as_ref()
            .ok_or_else(|| Error::Order("momenta must be computed before forces".into()))?;
        let n = self.num_bodies();
        let mut link = Vec::with_capacity(n);
        let mut joint = Vec::with_capacity(n);
        for i in 0..n {
            link.push(momentum_to_force(self.velocity(i), &m.link[i])?);
            joint.push(momentum_to_force(self.velocity(i), &m.joint[i])?);
        }
        self.forces = Some(Forces { link, joint });
        Ok(())
    }

    pub fn compute_torques(&mut self, model: &RobotModel) -> Result<()> {
        let f = self
            .forces
            .as_ref()
            .ok_or_else(|| Error::Order("forces must be computed before torques".into()))?;
        let torques = (0..self.num_bodies())
            .map(|i| {
                let st = model.joints[i].joint_type.selection().transpose();
                let fj = &f.joint[i];
                let blocks: Vec<DVector<f64>> = (0..=fj.order())
                    .map(|b| &st * fj.block(b))
                    .collect();
                DerivSeries::from_blocks(&blocks)
            })
            .collect::<Result<_>>()?;
        self.torques = Some(torques);
        Ok(())
    }

    pub fn momenta(&self) -> &Momenta {
        self.momenta.as_ref().expect("momenta not computed")
    }

    pub fn forces(&self) -> &Forces {
        self.forces.as_ref().expect("forces not computed")
    }

    pub fn torques(&self) -> &[DerivSeries] {
        self.torques.as_ref().expect("torques not computed")
    }
}

/// Forward pass plus momenta, forces and torques. Torques have order `k_state - 1`.
pub fn dynamics_state(
    model: &RobotModel,
    coords: &JointCoordSeries,
    gravity: &GravitySpec,
    k_state: usize,
) -> Result<ComprehensiveState> {
    let mut st = forward_state(model, coords, gravity, k_state)?;
    st.compute_momenta(model)?;
    if k_state >= 1 {
        st.compute_forces()?;
        st.compute_torques(model)?;
    }
    Ok(st)
}

/// Stacked whole-body operators over all moving bodies at the state order `K`
/// (`K+1` blocks per body).
#[derive(Clone, Debug)]
pub struct WholeBodyOperators {
    /// `^J𝔛_L`: `𝔳_J = ^J𝔛_L 𝔳_L - base_term`.
    pub joint_from_link: DMatrix<f64>,
    /// `^L𝔛_J`.
    pub link_from_joint: DMatrix<f64>,
    /// `^L𝔛*_J`: `𝔥_L = ^L𝔛*_J 𝔥_J`.
    pub link_from_joint_force: DMatrix<f64>,
    /// `^J𝔛*_L`.
    pub joint_from_link_force: DMatrix<f64>,
    /// `^Lŵ𝔛*_J`: world-frame counterpart, identity and zero blocks only.
    pub link_from_joint_world: DMatrix<f64>,
    /// `^Jŵ𝔛*_L`.
    pub joint_from_link_world: DMatrix<f64>,
    /// `^w𝔛_L = blockdiag(^w𝔛_{L_i})`.
    pub world_link: DMatrix<f64>,
    /// `^w𝔛_J`; equal to `^w𝔛_L` because joint and child-link frames coincide.
    pub world_joint: DMatrix<f64>,
    /// `ℑ_L`.
    pub inertia: DMatrix<f64>,
    /// `𝔘_L = blockdiag(𝔘(ad* 𝔳_{L_i}))` mapping order-`K` momenta to order-`K-1` forces.
    pub u_link: DMatrix<f64>,
    /// `𝔘_J`; uses the owning link velocity, so it equals `𝔘_L`.
    pub u_joint: DMatrix<f64>,
    /// `𝔖_J = blockdiag(𝔖_i)` at order `K`.
    pub selection: DMatrix<f64>,
    /// Contribution of the base motion to the root-adjacent joint velocities.
    pub base_term: DVector<f64>,
}

fn set_block(m: &mut DMatrix<f64>, r: usize, c: usize, b: &DMatrix<f64>) {
    m.view_mut((r, c), b.shape()).copy_from(b);
}

pub fn whole_body_operators(model: &RobotModel, state: &ComprehensiveState) -> Result<WholeBodyOperators> {
    let n = state.num_bodies();
    let k = state.order();
    let nb = k + 1;
    let d = 6 * nb;
    let eye = DMatrix::<f64>::identity(d, d);
    let world_m: Vec<DMatrix<f64>> = state.world.iter().map(|w| w.matrix_with_blocks(nb)).collect();
    let world_f: Vec<Cmtm> = state.world.iter().map(|w| w.with_flavor(Flavor::Force)).collect();
    let world_f_m: Vec<DMatrix<f64>> = world_f.iter().map(|w| w.matrix_with_blocks(nb)).collect();
    let world_m_inv: Vec<DMatrix<f64>> = state.world.iter().map(|w| w.inverse_matrix_with_blocks(nb)).collect();
    let world_f_inv: Vec<DMatrix<f64>> = world_f.iter().map(|w| w.inverse_matrix_with_blocks(nb)).collect();

    let mut jxl = DMatrix::zeros(n * d, n * d);
    let mut lxj = DMatrix::zeros(n * d, n * d);
    let mut lxj_f = DMatrix::zeros(n * d, n * d);
    let mut jxl_f = DMatrix::zeros(n * d, n * d);
    let mut lwxj = DMatrix::zeros(n * d, n * d);
    let mut jwxl = DMatrix::zeros(n * d, n * d);
    let mut wxl = DMatrix::zeros(n * d, n * d);
    let mut inertia = DMatrix::zeros(n * d, n * d);
    let mut u = DMatrix::zeros(n * 6 * k, n * d);
    let mut base_term = DVector::zeros(n * d);
    let dofs = model.dofs();
    let total_cols: usize = dofs.iter().map(|q| q * nb).sum();
    let mut sel = DMatrix::zeros(n * d, total_cols);
    let mut col = 0;
    for i in 0..n {
        set_block(&mut jxl, i * d, i * d, &eye);
        set_block(&mut lxj, i * d, i * d, &eye);
        set_block(&mut lxj_f, i * d, i * d, &eye);
        set_block(&mut jxl_f, i * d, i * d, &eye);
        set_block(&mut lwxj, i * d, i * d, &eye);
        set_block(&mut jwxl, i * d, i * d, &eye);
        set_block(&mut wxl, i * d, i * d, &world_m[i]);
        let inv_rel = state.relative[i].inverse_matrix_with_blocks(nb);
        match model.parent[i] {
            Some(p) => set_block(&mut jxl, i * d, p * d, &(-&inv_rel)),
            None => {
                let bt = &inv_rel * state.base.velocity().as_vector();
                base_term.rows_mut(i * d, d).copy_from(&bt);
            }
        }
        for &a in &model.ancestors[i] {
            set_block(&mut lxj, i * d, a * d, &(&world_m_inv[i] * &world_m[a]));
        }
        for &c in &model.children[i] {
            let rel_f = state.relative[c].with_flavor(Flavor::Force).matrix_with_blocks(nb);
            set_block(&mut lxj_f, i * d, c * d, &(-rel_f));
            set_block(&mut lwxj, i * d, c * d, &(-&eye));
        }
        for &c in &model.descendants[i] {
            set_block(&mut jxl_f, i * d, c * d, &(&world_f_inv[i] * &world_f_m[c]));
            set_block(&mut jwxl, i * d, c * d, &eye);
        }
        let inert = block_diag_repeat(&DMatrix::from_column_slice(6, 6, model.inertia[i].as_slice()), nb);
        set_block(&mut inertia, i * d, i * d, &inert);
        if k >= 1 {
            let v = state.velocity(i).truncate(k - 1)?;
            set_block(&mut u, i * 6 * k, i * d, &u_operator(&v, Flavor::Force));
        }
        let s = block_diag_repeat(&model.joints[i].joint_type.selection(), nb);
        set_block(&mut sel, i * d, col, &s);
        col += s.ncols();
    }
    Ok(WholeBodyOperators {
        joint_from_link: jxl,
        link_from_joint: lxj,
        link_from_joint_force: lxj_f,
        joint_from_link_force: jxl_f,
        link_from_joint_world: lwxj,
        joint_from_link_world: jwxl,
        world_link: wxl.clone(),
        world_joint: wxl,
        inertia,
        u_link: u.clone(),
        u_joint: u,
        selection: sel,
        base_term,
    })
}

/// `blockdiag(^w𝔛*_{L_i})` at the state order.
pub fn world_force_blockdiag(state: &ComprehensiveState) -> DMatrix<f64> {
    let n = state.num_bodies();
    let nb = state.order() + 1;
    let d = 6 * nb;
    let mut m = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        let b = state.world[i].with_flavor(Flavor::Force).matrix_with_blocks(nb);
        set_block(&mut m, i * d, i * d, &b);
    }
    m
}

/// Stacks per-body series into one vector.
pub fn stack_series(series: &[DerivSeries]) -> DVector<f64> {
    let total: usize = series.iter().map(|s| s.len()).sum();
    let mut out = DVector::zeros(total);
    let mut o = 0;
    for s in series {
        out.rows_mut(o, s.len()).copy_from(s.as_vector());
        o += s.len();
    }
    out
}
