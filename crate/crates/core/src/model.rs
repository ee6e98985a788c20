//! Kinematic-tree robot description.
//!
//! Every joint owns exactly one child link and the joint frame is the child
//! link frame. Moving bodies are indexed by joint index; the root link is
//! the fixed base and carries no joint.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{axis_rotation, skew3, Mat3, Mat6, SpatialTransform, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointType {
    /// Rotation about coordinate axis `axis` (0-based).
    Revolute { axis: usize },
    /// Translation along coordinate axis `axis` (0-based).
    Prismatic { axis: usize },
    /// Rotation parameterized by a rotation vector.
    Spherical,
    /// Rotation vector followed by a translation, `[φ; p]`.
    Floating,
}

impl JointType {
    pub fn dof(&self) -> usize {
        match self {
            JointType::Revolute { .. } | JointType::Prismatic { .. } => 1,
            JointType::Spherical => 3,
            JointType::Floating => 6,
        }
    }

    pub fn is_single_dof(&self) -> bool {
        self.dof() == 1
    }

    /// Plain selection matrix `S` (6 × dof).
    pub fn selection(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(6, self.dof());
        match *self {
            JointType::Revolute { axis } => s[(axis, 0)] = 1.0,
            JointType::Prismatic { axis } => s[(3 + axis, 0)] = 1.0,
            JointType::Spherical => {
                for i in 0..3 {
                    s[(i, i)] = 1.0;
                }
            }
            JointType::Floating => s.fill_with_identity(),
        }
        s
    }

    /// Joint motion transform for coordinates `q`.
    pub fn motion_transform(&self, q: &[f64]) -> SpatialTransform {
        assert_eq!(q.len(), self.dof());
        match *self {
            JointType::Revolute { axis } => {
                SpatialTransform::from_rotation(axis_rotation(axis, q[0])).expect("exact rotation")
            }
            JointType::Prismatic { axis } => {
                let mut p = Vec3::zeros();
                p[axis] = q[0];
                SpatialTransform::from_translation(p)
            }
            JointType::Spherical => SpatialTransform::from_rotation(rotvec_to_matrix(&Vec3::new(
                q[0], q[1], q[2],
            )))
            .expect("exact rotation"),
            JointType::Floating => SpatialTransform::new(
                rotvec_to_matrix(&Vec3::new(q[0], q[1], q[2])),
                Vec3::new(q[3], q[4], q[5]),
            )
            .expect("exact rotation"),
        }
    }

    /// Coordinates of `T(q)·exp(δ)` for a single-axis increment `δ = h e_i`.
    /// One-DoF joints are additive.
    pub fn retract(&self, q: &[f64], i: usize, h: f64) -> Vec<f64> {
        let mut out = q.to_vec();
        match *self {
            JointType::Revolute { .. } | JointType::Prismatic { .. } => out[i] += h,
            JointType::Spherical | JointType::Floating => {
                let r = rotvec_to_matrix(&Vec3::new(q[0], q[1], q[2]));
                if i < 3 {
                    let r2 = r * axis_rotation(i, h);
                    let phi = matrix_to_rotvec(&r2);
                    out[..3].copy_from_slice(phi.as_slice());
                } else {
                    let mut e = Vec3::zeros();
                    e[i - 3] = h;
                    let dp = r * e;
                    for k in 0..3 {
                        out[3 + k] += dp[k];
                    }
                }
            }
        }
        out
    }
}

pub fn rotvec_to_matrix(phi: &Vec3) -> Mat3 {
    nalgebra::Rotation3::from_scaled_axis(*phi).into_inner()
}

pub fn matrix_to_rotvec(r: &Mat3) -> Vec3 {
    nalgebra::Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

#[derive(Clone, Debug)]
pub struct JointSpec {
    pub id: String,
    pub parent: String,
    pub child: String,
    pub joint_type: JointType,
    /// Parent-link frame to joint frame, before the joint motion.
    pub fixed: SpatialTransform,
}

#[derive(Clone, Debug)]
pub struct LinkSpec {
    pub id: String,
    pub mass: f64,
    pub com: Vec3,
    /// `Ixx, Iyy, Izz, Ixy, Ixz, Iyz`, about the center of mass.
    pub inertia: [f64; 6],
}

impl LinkSpec {
    pub fn inertia_tensor(&self) -> Mat3 {
        let [ixx, iyy, izz, ixy, ixz, iyz] = self.inertia;
        Mat3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
    }
}

/// `[[I_c + m ĉĉᵀ, m ĉ], [m ĉᵀ, m I₃]]` about the link-frame origin.
pub fn spatial_inertia(link: &LinkSpec) -> Mat6 {
    let m = link.mass;
    let c = skew3(&link.com);
    let mut out = Mat6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(link.inertia_tensor() + c * c.transpose() * m));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(c * m));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(c.transpose() * m));
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Mat3::identity() * m));
    out
}

/// Plain selection matrix and its comprehensive form `blockdiag(S × (order+1))`.
pub fn selection_matrix(joint: &JointSpec, order: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = joint.joint_type.selection();
    (s.clone(), block_diag_repeat(&s, order + 1))
}

pub fn block_diag_repeat(s: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let (r, c) = s.shape();
    let mut out = DMatrix::zeros(r * n, c * n);
    for i in 0..n {
        out.view_mut((i * r, i * c), (r, c)).copy_from(s);
    }
    out
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub name: String,
    pub links: Vec<LinkDocument>,
    pub joints: Vec<JointDocument>,
    pub root: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDocument {
    pub id: String,
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [f64; 6],
}

#[derive(Debug, Deserialize, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Spherical,
    Floating,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct JointDocument {
    pub id: String,
    pub parent: String,
    pub child: String,
    #[serde(rename = "type")]
    pub kind: JointKind,
    /// Axis index 1..=3 for revolute and prismatic joints.
    #[serde(default)]
    pub axis: Option<usize>,
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<LinkSpec>,
    /// Topologically ordered: a joint's parent body precedes it.
    pub joints: Vec<JointSpec>,
    pub root: usize,
    /// Link index of each body (the joint's child link).
    pub body_link: Vec<usize>,
    /// Parent body of each body; `None` when the parent is the root link.
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Strict ancestors of each body, nearest first.
    pub ancestors: Vec<Vec<usize>>,
    /// Strict descendants of each body, in index order.
    pub descendants: Vec<Vec<usize>>,
    pub inertia: Vec<Mat6>,
    dof_offsets: Vec<usize>,
}

impl RobotModel {
    pub fn from_parts(
        name: impl Into<String>,
        links: Vec<LinkSpec>,
        joints: Vec<JointSpec>,
        root: &str,
    ) -> Result<Self> {
        let mut link_index = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate link id '{}'", l.id)));
            }
            validate_link(l)?;
        }
        let root_idx = *link_index
            .get(root)
            .ok_or_else(|| Error::Validation(format!("root link '{root}' is not defined")))?;

        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (j, js) in joints.iter().enumerate() {
            let p = *link_index.get(&js.parent).ok_or_else(|| {
                Error::Validation(format!("joint '{}' has dangling parent '{}'", js.id, js.parent))
            })?;
            let c = *link_index.get(&js.child).ok_or_else(|| {
                Error::Validation(format!("joint '{}' has dangling child '{}'", js.id, js.child))
            })?;
            if c == root_idx {
                return Err(Error::Validation(format!(
                    "cycle: joint '{}' moves the root link",
                    js.id
                )));
            }
            if p == c {
                return Err(Error::Validation(format!("cycle: joint '{}' connects a link to itself", js.id)));
            }
            if let Some(prev) = owner.insert(c, j) {
                return Err(Error::Validation(format!(
                    "link '{}' is the child of both '{}' and '{}'",
                    js.child, joints[prev].id, js.id
                )));
            }
        }
        // Walk each joint towards the root; revisiting a joint is a cycle.
        for (j, js) in joints.iter().enumerate() {
            let mut seen = vec![false; joints.len()];
            seen[j] = true;
            let mut link = link_index[&js.parent];
            while link != root_idx {
                let Some(&pj) = owner.get(&link) else {
                    return Err(Error::Validation(format!(
                        "joint '{}' is not connected to the root link '{root}'",
                        js.id
                    )));
                };
                if seen[pj] {
                    return Err(Error::Validation(format!("cycle through joint '{}'", joints[pj].id)));
                }
                seen[pj] = true;
                link = link_index[&joints[pj].parent];
            }
        }

        // Stable topological order.
        let mut placed = vec![false; joints.len()];
        let mut reached = vec![false; links.len()];
        reached[root_idx] = true;
        let mut order = Vec::with_capacity(joints.len());
        while order.len() < joints.len() {
            let before = order.len();
            for (j, js) in joints.iter().enumerate() {
                if !placed[j] && reached[link_index[&js.parent]] {
                    placed[j] = true;
                    reached[link_index[&js.child]] = true;
                    order.push(j);
                }
            }
            if order.len() == before {
                return Err(Error::Validation("joint graph is not a tree rooted at the root link".into()));
            }
        }
        let joints: Vec<JointSpec> = order.into_iter().map(|j| joints[j].clone()).collect();

        let n = joints.len();
        let body_link: Vec<usize> = joints.iter().map(|js| link_index[&js.child]).collect();
        let mut body_of_link = vec![None; links.len()];
        for (b, &l) in body_link.iter().enumerate() {
            body_of_link[l] = Some(b);
        }
        let parent: Vec<Option<usize>> = joints
            .iter()
            .map(|js| body_of_link[link_index[&js.parent]])
            .collect();
        let mut children = vec![Vec::new(); n];
        for (b, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(b);
            }
        }
        let mut ancestors = vec![Vec::new(); n];
        for b in 0..n {
            let mut cur = parent[b];
            while let Some(a) = cur {
                ancestors[b].push(a);
                cur = parent[a];
            }
        }
        let mut descendants = vec![Vec::new(); n];
        for b in 0..n {
            for &a in &ancestors[b] {
                descendants[a].push(b);
            }
        }
        let inertia = body_link.iter().map(|&l| spatial_inertia(&links[l])).collect();
        let mut dof_offsets = Vec::with_capacity(n + 1);
        dof_offsets.push(0);
        for js in &joints {
            dof_offsets.push(dof_offsets.last().unwrap() + js.joint_type.dof());
        }
        Ok(Self {
            name: name.into(),
            links,
            joints,
            root: root_idx,
            body_link,
            parent,
            children,
            ancestors,
            descendants,
            inertia,
            dof_offsets,
        })
    }

    pub fn num_bodies(&self) -> usize {
        self.joints.len()
    }

    pub fn dofs(&self) -> Vec<usize> {
        self.joints.iter().map(|j| j.joint_type.dof()).collect()
    }

    pub fn total_dof(&self) -> usize {
        *self.dof_offsets.last().unwrap()
    }

    pub fn dof_offset(&self, body: usize) -> usize {
        self.dof_offsets[body]
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    pub fn body_of_link(&self, link: usize) -> Option<usize> {
        self.body_link.iter().position(|&l| l == link)
    }

    /// Ancestor link ids of a link, root first.
    pub fn link_ancestors(&self, id: &str) -> Option<Vec<String>> {
        let link = self.link_index(id)?;
        let Some(body) = self.body_of_link(link) else {
            return Some(Vec::new());
        };
        let mut out = vec![self.links[self.root].id.clone()];
        for &a in self.ancestors[body].iter().rev() {
            out.push(self.links[self.body_link[a]].id.clone());
        }
        Some(out)
    }

    pub fn all_single_dof(&self) -> bool {
        self.joints.iter().all(|j| j.joint_type.is_single_dof())
    }
}

fn validate_link(l: &LinkSpec) -> Result<()> {
    if !(l.mass.is_finite() && l.mass > 0.0) {
        return Err(Error::Validation(format!("link '{}' must have positive mass, got {}", l.id, l.mass)));
    }
    if !l.com.iter().chain(l.inertia.iter()).all(|x| x.is_finite()) {
        return Err(Error::Validation(format!("link '{}' has non-finite inertial data", l.id)));
    }
    let i = l.inertia_tensor();
    let scale = i.abs().max().max(1.0);
    let min_eig = SymmetricEigen::new(i).eigenvalues.min();
    if min_eig < -1e-12 * scale {
        return Err(Error::Validation(format!(
            "link '{}' inertia is not positive semidefinite (min eigenvalue {min_eig:.3e})",
            l.id
        )));
    }
    Ok(())
}

fn joint_type_from_doc(j: &JointDocument) -> Result<JointType> {
    let axis = || -> Result<usize> {
        match j.axis {
            Some(a @ 1..=3) => Ok(a - 1),
            Some(a) => Err(Error::Validation(format!("joint '{}' axis {a} is not in 1..=3", j.id))),
            None => Err(Error::Validation(format!("joint '{}' is 1-DoF and needs an axis", j.id))),
        }
    };
    let t = match j.kind {
        JointKind::Revolute => JointType::Revolute { axis: axis()? },
        JointKind::Prismatic => JointType::Prismatic { axis: axis()? },
        JointKind::Spherical | JointKind::Floating => {
            if j.axis.is_some() {
                return Err(Error::Validation(format!("joint '{}' is multi-DoF and takes no axis", j.id)));
            }
            if j.kind == JointKind::Spherical {
                JointType::Spherical
            } else {
                JointType::Floating
            }
        }
    };
    Ok(t)
}

impl RobotModel {
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let links = doc
            .links
            .iter()
            .map(|l| LinkSpec {
                id: l.id.clone(),
                mass: l.mass,
                com: Vec3::from(l.com),
                inertia: l.inertia,
            })
            .collect();
        let joints = doc
            .joints
            .iter()
            .map(|j| {
                if !j.xyz.iter().chain(j.rpy.iter()).all(|x| x.is_finite()) {
                    return Err(Error::Validation(format!("joint '{}' has a non-finite offset", j.id)));
                }
                Ok(JointSpec {
                    id: j.id.clone(),
                    parent: j.parent.clone(),
                    child: j.child.clone(),
                    joint_type: joint_type_from_doc(j)?,
                    fixed: SpatialTransform::from_xyz_rpy(&Vec3::from(j.xyz), &Vec3::from(j.rpy)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(doc.name.clone(), links, joints, &doc.root)
    }
}

pub fn load_model(document: &str) -> Result<RobotModel> {
    let doc: ModelDocument = serde_json::from_str(document)?;
    RobotModel::from_document(&doc)
}

pub fn load_model_file(path: &std::path::Path) -> Result<RobotModel> {
    let text = std::fs::read_to_string(path)?;
    load_model(&text)
}
