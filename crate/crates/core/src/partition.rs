//! Index-set decomposition of the compound action.
//!
//! A compound action vector serves `n` tasks at once. Task `i` owns a subset
//! of the coordinates; coordinates owned by two or more tasks form the shared
//! set, and the shared set must equal the intersection of every sharing
//! task's coordinate list. Each task list is kept in canonical order:
//! its private (disjoint) coordinates ascending, then the shared coordinates
//! ascending, i.e. `a_i = [a_i^d, a_s]`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("task {0} has an empty action set")]
    EmptyTask(usize),
    #[error("task {task} repeats coordinate {coord}")]
    DuplicateCoord { task: usize, coord: usize },
    #[error("task {task} references coordinate {coord} outside 0..{dim}")]
    CoordOutOfRange { task: usize, coord: usize, dim: usize },
    #[error("coordinate {0} is not covered by any task")]
    UncoveredCoord(usize),
    #[error(
        "overlapping coordinates do not form a single common shared set \
         (coordinate {0} is shared but missing from sharing task {1})"
    )]
    InconsistentSharing(usize, usize),
    #[error("compound action has length {found}, partition expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Who contributes the action-value gradient at one compound coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordOwner {
    /// Exactly one task's chain uses this coordinate.
    Task(usize),
    /// Coordinate belongs to the shared set.
    Shared,
}

/// Decomposition of the compound action into per-task, shared, and
/// per-task-disjoint index lists.
#[derive(Debug, Clone)]
pub struct ActionPartition {
    compound_dim: usize,
    /// Canonical per-task lists: disjoint ascending, then shared ascending.
    task_indices: Vec<Vec<usize>>,
    shared: Vec<usize>,
    disjoint: Vec<Vec<usize>>,
    /// Tasks whose index list contains the shared set.
    shared_tasks: Vec<usize>,
    owners: Vec<CoordOwner>,
}

impl ActionPartition {
    /// Build and validate a partition from raw per-task coordinate lists
    /// (any order).
    pub fn new(compound_dim: usize, tasks: &[Vec<usize>]) -> Result<Self, PartitionError> {
        let n_tasks = tasks.len();
        assert!(n_tasks > 0, "partition needs at least one task");

        let mut use_count = vec![0usize; compound_dim];
        for (ti, list) in tasks.iter().enumerate() {
            if list.is_empty() {
                return Err(PartitionError::EmptyTask(ti));
            }
            let mut seen = vec![false; compound_dim];
            for &c in list {
                if c >= compound_dim {
                    return Err(PartitionError::CoordOutOfRange {
                        task: ti,
                        coord: c,
                        dim: compound_dim,
                    });
                }
                if seen[c] {
                    return Err(PartitionError::DuplicateCoord { task: ti, coord: c });
                }
                seen[c] = true;
                use_count[c] += 1;
            }
        }
        for (c, &n) in use_count.iter().enumerate() {
            if n == 0 {
                return Err(PartitionError::UncoveredCoord(c));
            }
        }

        // a_s: every coordinate used by two or more tasks.
        let shared: Vec<usize> = (0..compound_dim).filter(|&c| use_count[c] >= 2).collect();
        let shared_tasks: Vec<usize> = (0..n_tasks)
            .filter(|&ti| tasks[ti].iter().any(|c| use_count[*c] >= 2))
            .collect();
        // Eq. 4 demands a_s be the *common* intersection of every sharing
        // task, not just pairwise overlaps.
        for &c in &shared {
            for &ti in &shared_tasks {
                if !tasks[ti].contains(&c) {
                    return Err(PartitionError::InconsistentSharing(c, ti));
                }
            }
        }

        let disjoint: Vec<Vec<usize>> = tasks
            .iter()
            .map(|list| {
                let mut d: Vec<usize> = list
                    .iter()
                    .copied()
                    .filter(|&c| use_count[c] == 1)
                    .collect();
                d.sort_unstable();
                d
            })
            .collect();
        let task_indices: Vec<Vec<usize>> = disjoint
            .iter()
            .enumerate()
            .map(|(ti, d)| {
                let mut list = d.clone();
                if shared_tasks.contains(&ti) {
                    list.extend_from_slice(&shared);
                }
                list
            })
            .collect();
        let owners: Vec<CoordOwner> = (0..compound_dim)
            .map(|c| {
                if use_count[c] >= 2 {
                    CoordOwner::Shared
                } else {
                    let ti = tasks.iter().position(|l| l.contains(&c)).unwrap();
                    CoordOwner::Task(ti)
                }
            })
            .collect();

        Ok(Self {
            compound_dim,
            task_indices,
            shared,
            disjoint,
            shared_tasks,
            owners,
        })
    }

    /// Partition with a single task owning every coordinate (the DDPG view).
    pub fn single_task(compound_dim: usize) -> Self {
        Self::new(compound_dim, &[(0..compound_dim).collect()]).unwrap()
    }

    pub fn n_tasks(&self) -> usize {
        self.task_indices.len()
    }

    pub fn compound_dim(&self) -> usize {
        self.compound_dim
    }

    /// Canonical index list of task `i`: `[a_i^d, a_s]`.
    pub fn task_indices(&self, task: usize) -> &[usize] {
        &self.task_indices[task]
    }

    pub fn task_dim(&self, task: usize) -> usize {
        self.task_indices[task].len()
    }

    /// The shared set `a_s`, ascending.
    pub fn shared_indices(&self) -> &[usize] {
        &self.shared
    }

    /// `a_i^d = a_i \ a_s`, ascending.
    pub fn disjoint_indices(&self, task: usize) -> &[usize] {
        &self.disjoint[task]
    }

    /// Number of tasks whose index list contains the shared set (`k`).
    pub fn shared_task_count(&self) -> usize {
        self.shared_tasks.len()
    }

    pub fn shared_tasks(&self) -> &[usize] {
        &self.shared_tasks
    }

    pub fn is_shared_task(&self, task: usize) -> bool {
        self.shared_tasks.contains(&task)
    }

    pub fn owner(&self, coord: usize) -> CoordOwner {
        self.owners[coord]
    }

    /// Gather the coordinates of task `i` out of a compound vector, in
    /// canonical `[a_i^d, a_s]` order.
    pub fn gather_task(&self, task: usize, compound: &[f64]) -> Vec<f64> {
        self.task_indices[task].iter().map(|&c| compound[c]).collect()
    }

    /// Split a compound action into per-task, shared, and disjoint views.
    pub fn split(&self, compound: &[f64]) -> Result<PartitionedAction, PartitionError> {
        if compound.len() != self.compound_dim {
            return Err(PartitionError::LengthMismatch {
                expected: self.compound_dim,
                found: compound.len(),
            });
        }
        Ok(PartitionedAction {
            per_task: (0..self.n_tasks())
                .map(|t| self.gather_task(t, compound))
                .collect(),
            shared: self.shared.iter().map(|&c| compound[c]).collect(),
            disjoint: self
                .disjoint
                .iter()
                .map(|d| d.iter().map(|&c| compound[c]).collect())
                .collect(),
        })
    }

    /// Inverse of [`split`](Self::split): scatter the shared and disjoint
    /// views back into a compound vector.
    pub fn reassemble(&self, parts: &PartitionedAction) -> Vec<f64> {
        let mut out = vec![0.0; self.compound_dim];
        for (&c, &v) in self.shared.iter().zip(&parts.shared) {
            out[c] = v;
        }
        for (d, vals) in self.disjoint.iter().zip(&parts.disjoint) {
            for (&c, &v) in d.iter().zip(vals) {
                out[c] = v;
            }
        }
        out
    }
}

/// Views of one compound action under a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedAction {
    /// `a_i` in canonical `[a_i^d, a_s]` order.
    pub per_task: Vec<Vec<f64>>,
    /// `a_s` values, ascending by coordinate.
    pub shared: Vec<f64>,
    /// `a_i^d` values, ascending by coordinate.
    pub disjoint: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 2 shared trunk coordinates, branches of 3/4/5 private coordinates.
    fn paper_partition() -> ActionPartition {
        ActionPartition::new(
            14,
            &[
                vec![0, 1, 2, 3, 4],
                vec![0, 1, 5, 6, 7, 8],
                vec![0, 1, 9, 10, 11, 12, 13],
            ],
        )
        .unwrap()
    }

    #[test]
    fn paper_partition_dims() {
        let p = paper_partition();
        assert_eq!(p.compound_dim(), 14);
        assert_eq!(p.shared_indices(), &[0, 1]);
        assert_eq!(p.shared_task_count(), 3);
        assert_eq!(p.task_dim(0), 5);
        assert_eq!(p.task_dim(1), 6);
        assert_eq!(p.task_dim(2), 7);
        assert_eq!(p.disjoint_indices(0), &[2, 3, 4]);
        assert_eq!(p.disjoint_indices(1), &[5, 6, 7, 8]);
        assert_eq!(p.disjoint_indices(2), &[9, 10, 11, 12, 13]);
    }

    #[test]
    fn paper_partition_split() {
        let p = paper_partition();
        let a: Vec<f64> = (0..14).map(|v| v as f64).collect();
        let parts = p.split(&a).unwrap();
        assert_eq!(parts.shared, vec![0.0, 1.0]);
        assert_eq!(parts.per_task[0], vec![2.0, 3.0, 4.0, 0.0, 1.0]);
        assert_eq!(parts.per_task[1].len(), 6);
        assert_eq!(parts.per_task[2].len(), 7);
        assert_eq!(p.reassemble(&parts), a);
    }

    #[test]
    fn empty_shared_set_means_disjoint_equals_task() {
        let p = ActionPartition::new(5, &[vec![0, 1], vec![2, 3, 4]]).unwrap();
        assert!(p.shared_indices().is_empty());
        assert_eq!(p.shared_task_count(), 0);
        for t in 0..2 {
            assert_eq!(p.disjoint_indices(t), p.task_indices(t));
        }
    }

    #[test]
    fn fully_shared_tasks_have_empty_disjoint() {
        let p = ActionPartition::new(3, &[vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
        assert_eq!(p.shared_indices(), &[0, 1, 2]);
        assert_eq!(p.shared_task_count(), 2);
        assert!(p.disjoint_indices(0).is_empty());
        assert!(p.disjoint_indices(1).is_empty());
        let parts = p.split(&[7.0, 8.0, 9.0]).unwrap();
        assert!(parts.disjoint[0].is_empty());
        assert_eq!(parts.per_task[0], vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn mixed_shared_and_independent_tasks() {
        // Tasks 0 and 1 share {0}; task 2 is independent.
        let p = ActionPartition::new(5, &[vec![0, 1], vec![0, 2], vec![3, 4]]).unwrap();
        assert_eq!(p.shared_indices(), &[0]);
        assert_eq!(p.shared_tasks(), &[0, 1]);
        assert!(!p.is_shared_task(2));
        assert_eq!(p.owner(3), CoordOwner::Task(2));
        assert_eq!(p.owner(0), CoordOwner::Shared);
    }

    #[test]
    fn rejects_uncovered_coordinate() {
        assert!(matches!(
            ActionPartition::new(3, &[vec![0, 1]]),
            Err(PartitionError::UncoveredCoord(2))
        ));
    }

    #[test]
    fn rejects_pairwise_overlap_without_common_intersection() {
        // 0 is in tasks {0,1}, 1 is in tasks {0,2}: both shared, but no
        // common intersection across the three sharing tasks.
        let r = ActionPartition::new(4, &[vec![0, 1], vec![0, 2], vec![1, 3]]);
        assert!(matches!(r, Err(PartitionError::InconsistentSharing(..))));
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(matches!(
            ActionPartition::new(2, &[vec![0, 0], vec![1]]),
            Err(PartitionError::DuplicateCoord { .. })
        ));
        assert!(matches!(
            ActionPartition::new(2, &[vec![0, 5], vec![1]]),
            Err(PartitionError::CoordOutOfRange { .. })
        ));
    }

    #[test]
    fn split_rejects_length_mismatch() {
        let p = paper_partition();
        assert!(matches!(
            p.split(&[0.0; 3]),
            Err(PartitionError::LengthMismatch { .. })
        ));
    }

    /// Random valid partition: a shared block used by the first `k` tasks
    /// plus private blocks for every task, coordinates shuffled.
    fn arb_partition() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
        (2usize..5, 0usize..4, proptest::collection::vec(1usize..4, 2..5), any::<u64>()).prop_map(
            |(k, shared_len, private_lens, seed)| {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let n_tasks = private_lens.len();
                let k = k.min(n_tasks);
                let shared_len = if k >= 2 { shared_len } else { 0 };
                let dim: usize = shared_len + private_lens.iter().sum::<usize>();
                let mut coords: Vec<usize> = (0..dim).collect();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                coords.shuffle(&mut rng);
                let shared: Vec<usize> = coords[..shared_len].to_vec();
                let mut offset = shared_len;
                let mut tasks = Vec::new();
                for (ti, &len) in private_lens.iter().enumerate() {
                    let mut list: Vec<usize> = coords[offset..offset + len].to_vec();
                    offset += len;
                    if ti < k {
                        list.extend_from_slice(&shared);
                    }
                    tasks.push(list);
                }
                (dim, tasks)
            },
        )
    }

    proptest! {
        #[test]
        fn random_partitions_satisfy_invariants((dim, tasks) in arb_partition()) {
            let p = ActionPartition::new(dim, &tasks).unwrap();
            // Union of task lists covers every coordinate exactly once
            // across shared + disjoint sets.
            let mut covered = vec![0usize; dim];
            for &c in p.shared_indices() {
                covered[c] += 1;
            }
            for t in 0..p.n_tasks() {
                for &c in p.disjoint_indices(t) {
                    covered[c] += 1;
                }
            }
            prop_assert!(covered.iter().all(|&n| n == 1));
            // Shared set is contained in every sharing task's list and
            // absent from every independent task's list.
            for t in 0..p.n_tasks() {
                let has_shared = p.shared_indices().iter().all(|c| p.task_indices(t).contains(c));
                let has_any = p.shared_indices().iter().any(|c| p.task_indices(t).contains(c));
                if p.is_shared_task(t) {
                    prop_assert!(has_shared || p.shared_indices().is_empty());
                } else {
                    prop_assert!(!has_any);
                }
            }
            // Split then reassemble is the identity.
            let a: Vec<f64> = (0..dim).map(|v| v as f64 * 1.5 - 3.0).collect();
            let parts = p.split(&a).unwrap();
            prop_assert_eq!(p.reassemble(&parts), a);
        }
    }
}
