//! Forward-kinematics cross-checks against independent oracles.
//!
//! The library composes 3x3 rotation matrices down the tree. The oracles
//! here never build a matrix: the planar one multiplies complex phases, the
//! spatial one rotates vectors with Rodrigues' formula from the distal end
//! of each chain inward. Agreement is required to 1e-10 absolute.

use digrad_core::env::{KinematicTree, TreeKind};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Planar oracle: walk each root-to-effector chain accumulating the joint
/// angles, placing each link as `L * exp(i * cumulative_angle)`.
fn planar_complex_oracle(tree: &KinematicTree, q: &[f64], task: usize) -> [f64; 2] {
    let mut pos = Complex64::new(0.0, 0.0);
    let mut cumulative = 0.0;
    for &j in tree.chain(task) {
        cumulative += q[j];
        pos += tree.joints()[j].length * Complex64::new(0.0, cumulative).exp();
    }
    [pos.re, pos.im]
}

/// Rodrigues rotation of `v` about unit `axis` by `angle`.
fn rodrigues(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let cross = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    [
        v[0] * c + cross[0] * s + axis[0] * dot * (1.0 - c),
        v[1] * c + cross[1] * s + axis[1] * dot * (1.0 - c),
        v[2] * c + cross[2] * s + axis[2] * dot * (1.0 - c),
    ]
}

/// Spatial oracle: build each link vector by applying the chain's rotations
/// to `[L, 0, 0]` from the innermost joint outward, one Rodrigues rotation
/// at a time, then sum the links.
fn spatial_rodrigues_oracle(tree: &KinematicTree, q: &[f64], task: usize) -> [f64; 3] {
    let chain = tree.chain(task);
    let mut pos = [0.0; 3];
    for (depth, &j) in chain.iter().enumerate() {
        let mut link = [tree.joints()[j].length, 0.0, 0.0];
        // Rotations apply innermost-last: joint j's own rotation first,
        // then each ancestor's, so the loop walks the prefix in reverse.
        for &anc in chain[..=depth].iter().rev() {
            link = rodrigues(link, tree.joints()[anc].axis, q[anc]);
        }
        pos[0] += link[0];
        pos[1] += link[1];
        pos[2] += link[2];
    }
    pos
}

fn random_q(tree: &KinematicTree, rng: &mut ChaCha8Rng) -> Vec<f64> {
    tree.joints()
        .iter()
        .map(|j| rng.gen_range(j.limits.0..j.limits.1))
        .collect()
}

fn check_tree_against_oracle(tree: &KinematicTree, configs: usize, seed: u64, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..configs {
        let q = random_q(tree, &mut rng);
        let pose = tree.forward_kinematics(&q);
        for task in 0..tree.n_tasks() {
            let got = &pose.effectors[task];
            match tree.kind() {
                TreeKind::Planar => {
                    let expect = planar_complex_oracle(tree, &q, task);
                    for (g, e) in got.iter().zip(&expect) {
                        assert!(
                            (g - e).abs() < tol,
                            "{} task {task}: {got:?} vs {expect:?}",
                            tree.name()
                        );
                    }
                }
                TreeKind::Spatial => {
                    let expect = spatial_rodrigues_oracle(tree, &q, task);
                    for (g, e) in got.iter().zip(&expect) {
                        assert!(
                            (g - e).abs() < tol,
                            "{} task {task}: {got:?} vs {expect:?}",
                            tree.name()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn paper_8link_matches_complex_oracle_on_20_random_configs() {
    check_tree_against_oracle(&KinematicTree::paper_8link(), 20, 7, 1e-10);
}

#[test]
fn all_builtins_match_oracles_on_100_random_configs() {
    for name in KinematicTree::builtin_names() {
        let tree = KinematicTree::builtin(name).unwrap();
        check_tree_against_oracle(&tree, 100, 42, 1e-10);
    }
}

#[test]
fn joint_tips_match_oracle_prefixes() {
    // Every prefix of a chain is itself a chain ending at that joint; the
    // planar oracle therefore checks all joint tips, not only effectors.
    let tree = KinematicTree::paper_8link();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let q = random_q(&tree, &mut rng);
        let pose = tree.forward_kinematics(&q);
        for task in 0..tree.n_tasks() {
            let chain = tree.chain(task);
            for depth in 0..chain.len() {
                let mut pos = Complex64::new(0.0, 0.0);
                let mut cumulative = 0.0;
                for &j in &chain[..=depth] {
                    cumulative += q[j];
                    pos += Complex64::new(0.0, cumulative).exp();
                }
                let tip = pose.joint_tips[chain[depth]];
                assert!((tip[0] - pos.re).abs() < 1e-10);
                assert!((tip[1] - pos.im).abs() < 1e-10);
            }
        }
    }
}
