//! Branched revolute-joint kinematic trees.
//!
//! A tree is a list of joints in topological order (each parent declared
//! before its children). Joint `j` rotates about its axis by `q[j]` in its
//! parent's frame and carries a link of `length[j]` along its local x axis;
//! the link tip is the origin of every child frame. End effectors are leaf
//! joints, one per task, and each task's action coordinates are exactly the
//! joints on its root-to-effector chain — so a trunk shared by several
//! branches induces a shared action set.
//!
//! Trees can be defined in a plain text file (see `from_str`); the built-in
//! topologies also ship as files so new layouts need no code changes.

use super::geom::{self, Mat3, Vec3};
use crate::partition::{ActionPartition, PartitionError};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("tree has no joints")]
    Empty,
    #[error("joint {0}: parent {1} must be declared before it")]
    BadParent(usize, usize),
    #[error("joint {0}: link length must be > 0")]
    BadLength(usize),
    #[error("joint {0}: invalid rotation axis")]
    BadAxis(usize),
    #[error("joint {0}: limits must be finite with lo < hi")]
    BadLimits(usize),
    #[error("planar trees only rotate about z (joint {0})")]
    NonPlanarAxis(usize),
    #[error("velocity limit must be > 0")]
    BadVelocityLimit,
    #[error("tree needs at least one end effector")]
    NoEffectors,
    #[error("effector {0} is not a valid joint index")]
    BadEffector(usize),
    #[error("joint {0} is not on any task chain")]
    UnusedJoint(usize),
    #[error("task chains do not form a valid shared-action partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("declared chain for task {0} does not match the tree structure")]
    ChainMismatch(usize),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeKind {
    Planar,
    Spatial,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub parent: Option<usize>,
    pub length: f64,
    pub axis: Vec3,
    pub limits: (f64, f64),
}

/// Full forward-kinematics result for one configuration.
#[derive(Debug, Clone)]
pub struct FkPose {
    /// Link-tip position of every joint, in declaration order.
    pub joint_tips: Vec<Vec3>,
    /// End-effector position per task, truncated to the tree's dimension.
    pub effectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct KinematicTree {
    name: String,
    kind: TreeKind,
    joints: Vec<Joint>,
    effectors: Vec<usize>,
    chains: Vec<Vec<usize>>,
    velocity_limit: f64,
}

impl KinematicTree {
    pub fn new(
        name: impl Into<String>,
        kind: TreeKind,
        joints: Vec<Joint>,
        effectors: Vec<usize>,
        velocity_limit: f64,
    ) -> Result<Self, TreeError> {
        if joints.is_empty() {
            return Err(TreeError::Empty);
        }
        if !(velocity_limit > 0.0) {
            return Err(TreeError::BadVelocityLimit);
        }
        if effectors.is_empty() {
            return Err(TreeError::NoEffectors);
        }
        let mut joints = joints;
        for (j, joint) in joints.iter_mut().enumerate() {
            if let Some(p) = joint.parent {
                if p >= j {
                    return Err(TreeError::BadParent(j, p));
                }
            }
            if !(joint.length > 0.0) || !joint.length.is_finite() {
                return Err(TreeError::BadLength(j));
            }
            let n = geom::norm(&joint.axis);
            if !(n > 0.0) || !n.is_finite() {
                return Err(TreeError::BadAxis(j));
            }
            for c in joint.axis.iter_mut() {
                *c /= n;
            }
            if kind == TreeKind::Planar
                && (joint.axis[0].abs() > 1e-12 || joint.axis[1].abs() > 1e-12)
            {
                return Err(TreeError::NonPlanarAxis(j));
            }
            let (lo, hi) = joint.limits;
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(TreeError::BadLimits(j));
            }
        }
        for &e in &effectors {
            if e >= joints.len() {
                return Err(TreeError::BadEffector(e));
            }
        }
        // Root-to-effector chain per task.
        let chains: Vec<Vec<usize>> = effectors
            .iter()
            .map(|&e| {
                let mut chain = vec![e];
                let mut cur = e;
                while let Some(p) = joints[cur].parent {
                    chain.push(p);
                    cur = p;
                }
                chain.reverse();
                chain
            })
            .collect();
        let mut used = vec![false; joints.len()];
        for chain in &chains {
            for &j in chain {
                used[j] = true;
            }
        }
        if let Some(j) = used.iter().position(|&u| !u) {
            return Err(TreeError::UnusedJoint(j));
        }
        // The chains must induce a valid single-shared-set partition.
        ActionPartition::new(joints.len(), &chains)?;
        Ok(Self {
            name: name.into(),
            kind,
            joints,
            effectors,
            chains,
            velocity_limit,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    /// Workspace dimension: 2 for planar trees, 3 for spatial.
    pub fn dim(&self) -> usize {
        match self.kind {
            TreeKind::Planar => 2,
            TreeKind::Spatial => 3,
        }
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.effectors.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn effector(&self, task: usize) -> usize {
        self.effectors[task]
    }

    /// Ordered joint chain from the root to task `i`'s end effector.
    pub fn chain(&self, task: usize) -> &[usize] {
        &self.chains[task]
    }

    pub fn velocity_limit(&self) -> f64 {
        self.velocity_limit
    }

    /// Straight-arm reach of task `i`: the sum of link lengths on its chain.
    pub fn max_reach(&self, task: usize) -> f64 {
        self.chains[task].iter().map(|&j| self.joints[j].length).sum()
    }

    /// The shared-action partition induced by the task chains.
    pub fn action_partition(&self) -> ActionPartition {
        ActionPartition::new(self.joints.len(), &self.chains)
            .expect("validated at construction")
    }

    /// All joints in the subtree rooted at `j` (including `j`).
    pub fn subtree(&self, j: usize) -> Vec<usize> {
        let mut out = vec![j];
        for child in j + 1..self.joints.len() {
            if let Some(p) = self.joints[child].parent {
                if out.contains(&p) {
                    out.push(child);
                }
            }
        }
        out
    }

    /// Compose per-joint rotations and link translations along the tree.
    pub fn forward_kinematics(&self, q: &[f64]) -> FkPose {
        assert_eq!(q.len(), self.joints.len(), "configuration length mismatch");
        let mut frames: Vec<(Mat3, Vec3)> = Vec::with_capacity(self.joints.len());
        let mut tips = Vec::with_capacity(self.joints.len());
        for (j, joint) in self.joints.iter().enumerate() {
            let (parent_rot, parent_tip) = match joint.parent {
                Some(p) => frames[p],
                None => (geom::IDENTITY, [0.0, 0.0, 0.0]),
            };
            let rot = geom::mat_mul(&parent_rot, &geom::rotation(joint.axis, q[j]));
            let tip = geom::add(&parent_tip, &geom::mat_vec(&rot, &[joint.length, 0.0, 0.0]));
            frames.push((rot, tip));
            tips.push(tip);
        }
        let dim = self.dim();
        let effectors = self
            .effectors
            .iter()
            .map(|&e| tips[e][..dim].to_vec())
            .collect();
        FkPose {
            joint_tips: tips,
            effectors,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper-8link" => Some(Self::paper_8link()),
            "mini-4link" => Some(Self::mini_4link()),
            "upper-body" => Some(Self::upper_body()),
            _ => None,
        }
    }

    pub fn builtin_names() -> [&'static str; 3] {
        ["paper-8link", "mini-4link", "upper-body"]
    }

    /// Planar branched manipulator: a 2-joint shared trunk with exclusive
    /// branches of 3, 4, and 5 joints, unit links.
    pub fn paper_8link() -> Self {
        let mut joints = vec![planar_joint(None), planar_joint(Some(0))];
        let mut effectors = Vec::new();
        for branch_len in [3usize, 4, 5] {
            let mut parent = 1;
            for _ in 0..branch_len {
                joints.push(planar_joint(Some(parent)));
                parent = joints.len() - 1;
            }
            effectors.push(parent);
        }
        Self::new("paper-8link", TreeKind::Planar, joints, effectors, 0.1).unwrap()
    }

    /// Small planar tree for fast runs: 2 shared trunk joints and two
    /// 2-joint branches.
    pub fn mini_4link() -> Self {
        let mut joints = vec![planar_joint(None), planar_joint(Some(0))];
        let mut effectors = Vec::new();
        for _ in 0..2 {
            let mut parent = 1;
            for _ in 0..2 {
                joints.push(planar_joint(Some(parent)));
                parent = joints.len() - 1;
            }
            effectors.push(parent);
        }
        Self::new("mini-4link", TreeKind::Planar, joints, effectors, 0.1).unwrap()
    }

    /// Spatial tree mirroring an articulated upper body: a 5-joint trunk
    /// shared by two 4-joint arms, yaw/pitch axes alternating along each
    /// chain.
    pub fn upper_body() -> Self {
        let z = [0.0, 0.0, 1.0];
        let y = [0.0, 1.0, 0.0];
        let mut joints = Vec::new();
        for j in 0..5 {
            let axis = if j % 2 == 0 { z } else { y };
            joints.push(spatial_joint(if j == 0 { None } else { Some(j - 1) }, axis));
        }
        let mut effectors = Vec::new();
        for _ in 0..2 {
            let mut parent = 4;
            for k in 0..4 {
                let axis = if k % 2 == 0 { y } else { z };
                joints.push(spatial_joint(Some(parent), axis));
                parent = joints.len() - 1;
            }
            effectors.push(parent);
        }
        Self::new("upper-body", TreeKind::Spatial, joints, effectors, 0.1).unwrap()
    }

    /// Parse a tree definition file. See the shipped `envs/*.tree` files
    /// for the format: `name`, `kind`, `velocity_limit`, one `joint` line
    /// per joint in index order, and one `task` line per end effector with
    /// its full root-to-effector chain.
    pub fn from_str(text: &str) -> Result<Self, TreeError> {
        let mut name = String::from("unnamed");
        let mut kind = None;
        let mut velocity_limit = 0.1;
        let mut joints: Vec<Joint> = Vec::new();
        let mut effectors: Vec<usize> = Vec::new();
        let mut declared_chains: Vec<Vec<usize>> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let parse = |msg: String| TreeError::Parse { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens[0] {
                "name" => {
                    name = tokens
                        .get(1)
                        .ok_or_else(|| parse("name needs a value".into()))?
                        .to_string();
                }
                "kind" => {
                    kind = Some(match tokens.get(1).copied() {
                        Some("planar") => TreeKind::Planar,
                        Some("spatial") => TreeKind::Spatial,
                        other => {
                            return Err(parse(format!(
                                "kind must be planar or spatial, got {other:?}"
                            )))
                        }
                    });
                }
                "velocity_limit" => {
                    velocity_limit = parse_f64(tokens.get(1), "velocity_limit", line)?;
                }
                "joint" => {
                    let idx: usize = tokens
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse("joint needs an index".into()))?;
                    if idx != joints.len() {
                        return Err(parse(format!(
                            "joints must be declared in order; expected index {}",
                            joints.len()
                        )));
                    }
                    let mut parent = None;
                    let mut length = 1.0;
                    let mut axis = [0.0, 0.0, 1.0];
                    let mut limits = (-PI, PI);
                    let mut i = 2;
                    while i < tokens.len() {
                        match tokens[i] {
                            "parent" => {
                                let v: i64 = tokens
                                    .get(i + 1)
                                    .and_then(|t| t.parse().ok())
                                    .ok_or_else(|| parse("parent needs an integer".into()))?;
                                parent = if v < 0 { None } else { Some(v as usize) };
                                i += 2;
                            }
                            "length" => {
                                length = parse_f64(tokens.get(i + 1), "length", line)?;
                                i += 2;
                            }
                            "axis" => match tokens.get(i + 1).copied() {
                                Some("x") => {
                                    axis = [1.0, 0.0, 0.0];
                                    i += 2;
                                }
                                Some("y") => {
                                    axis = [0.0, 1.0, 0.0];
                                    i += 2;
                                }
                                Some("z") => {
                                    axis = [0.0, 0.0, 1.0];
                                    i += 2;
                                }
                                _ => {
                                    axis = [
                                        parse_f64(tokens.get(i + 1), "axis", line)?,
                                        parse_f64(tokens.get(i + 2), "axis", line)?,
                                        parse_f64(tokens.get(i + 3), "axis", line)?,
                                    ];
                                    i += 4;
                                }
                            },
                            "limits" => {
                                limits = (
                                    parse_f64(tokens.get(i + 1), "limits", line)?,
                                    parse_f64(tokens.get(i + 2), "limits", line)?,
                                );
                                i += 3;
                            }
                            other => {
                                return Err(parse(format!("unknown joint attribute '{other}'")))
                            }
                        }
                    }
                    joints.push(Joint {
                        parent,
                        length,
                        axis,
                        limits,
                    });
                }
                "task" => {
                    let idx: usize = tokens
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse("task needs an index".into()))?;
                    if idx != effectors.len() {
                        return Err(parse(format!(
                            "tasks must be declared in order; expected index {}",
                            effectors.len()
                        )));
                    }
                    if tokens.get(2) != Some(&"effector") {
                        return Err(parse("task line: expected 'effector <joint>'".into()));
                    }
                    let e: usize = tokens
                        .get(3)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse("effector needs a joint index".into()))?;
                    if tokens.get(4) != Some(&"chain") {
                        return Err(parse("task line: expected 'chain <j0> <j1> ...'".into()));
                    }
                    let chain: Result<Vec<usize>, _> =
                        tokens[5..].iter().map(|t| t.parse::<usize>()).collect();
                    let chain =
                        chain.map_err(|_| parse("chain entries must be joint indices".into()))?;
                    effectors.push(e);
                    declared_chains.push(chain);
                }
                other => return Err(parse(format!("unknown directive '{other}'"))),
            }
        }

        let kind = kind.ok_or(TreeError::Parse {
            line: 0,
            msg: "missing 'kind' directive".into(),
        })?;
        let tree = Self::new(name, kind, joints, effectors, velocity_limit)?;
        for (t, declared) in declared_chains.iter().enumerate() {
            if declared != &tree.chains[t] {
                return Err(TreeError::ChainMismatch(t));
            }
        }
        Ok(tree)
    }

    pub fn from_file(path: &Path) -> Result<Self, TreeError> {
        let text = std::fs::read_to_string(path).map_err(|source| TreeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    /// Render the tree in the definition-file format; `from_str` on the
    /// result reproduces the tree.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(
            out,
            "kind {}",
            match self.kind {
                TreeKind::Planar => "planar",
                TreeKind::Spatial => "spatial",
            }
        );
        let _ = writeln!(out, "velocity_limit {}", self.velocity_limit);
        for (j, joint) in self.joints.iter().enumerate() {
            let parent = joint.parent.map(|p| p as i64).unwrap_or(-1);
            let [ax, ay, az] = joint.axis;
            let axis = if joint.axis == [1.0, 0.0, 0.0] {
                "x".to_string()
            } else if joint.axis == [0.0, 1.0, 0.0] {
                "y".to_string()
            } else if joint.axis == [0.0, 0.0, 1.0] {
                "z".to_string()
            } else {
                format!("{ax} {ay} {az}")
            };
            let _ = writeln!(
                out,
                "joint {j} parent {parent} length {} axis {axis} limits {} {}",
                joint.length, joint.limits.0, joint.limits.1
            );
        }
        for (t, &e) in self.effectors.iter().enumerate() {
            let chain: Vec<String> = self.chains[t].iter().map(|j| j.to_string()).collect();
            let _ = writeln!(out, "task {t} effector {e} chain {}", chain.join(" "));
        }
        out
    }
}

fn parse_f64(token: Option<&&str>, what: &str, line: usize) -> Result<f64, TreeError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| TreeError::Parse {
            line,
            msg: format!("{what} needs a numeric value"),
        })
}

fn planar_joint(parent: Option<usize>) -> Joint {
    Joint {
        parent,
        length: 1.0,
        axis: [0.0, 0.0, 1.0],
        limits: (-PI, PI),
    }
}

fn spatial_joint(parent: Option<usize>, axis: Vec3) -> Joint {
    Joint {
        parent,
        length: 1.0,
        axis,
        limits: (-PI, PI),
    }
}
