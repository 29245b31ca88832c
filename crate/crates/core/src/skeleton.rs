//! Joint hierarchies stored as parent-indexed forests.
//!
//! Invariant everywhere: `parent[i] < i`, so every slice prefix is a valid
//! forest and a single forward pass visits parents before children. Inputs
//! that violate the order are repaired by `reindex_topological`, which also
//! reports the permutation it applied.

use thiserror::Error;

/// Sentinel for "no ancestor" in the packed tables.
const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("skeleton has no joints")]
    Empty,
    #[error("joint {joint}: parent index {parent} out of range for {len} joints")]
    OutOfRange {
        joint: usize,
        parent: usize,
        len: usize,
    },
    #[error("joint {joint}: parent {parent} does not precede it")]
    ForwardParent { joint: usize, parent: usize },
    #[error("parent links contain a cycle")]
    CycleDetected,
    #[error("block size {block_size} is too small (minimum 2)")]
    InvalidBlockSize { block_size: usize },
    #[error("joint index {index} out of range for {len} joints")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{names} names for {joints} joints")]
    NameCountMismatch { names: usize, joints: usize },
}

/// A forest of joints. `parent[i] == None` marks a root; otherwise
/// `parent[i] < i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skeleton {
    parent: Vec<Option<usize>>,
    names: Option<Vec<String>>,
}

impl Skeleton {
    /// Validates the parent order. A parent pointing at or past its child is
    /// rejected, not repaired; use [`reindex_topological`] for unordered
    /// input.
    pub fn new(parent: Vec<Option<usize>>) -> Result<Self, SkeletonError> {
        if parent.is_empty() {
            return Err(SkeletonError::Empty);
        }
        let len = parent.len();
        assert!(len <= NONE as usize, "joint count exceeds table capacity");
        for (joint, &p) in parent.iter().enumerate() {
            match p {
                None => {}
                Some(p) if p >= len => {
                    return Err(SkeletonError::OutOfRange {
                        joint,
                        parent: p,
                        len,
                    })
                }
                Some(p) if p == joint => return Err(SkeletonError::CycleDetected),
                Some(p) if p > joint => {
                    return Err(SkeletonError::ForwardParent { joint, parent: p })
                }
                Some(_) => {}
            }
        }
        Ok(Skeleton {
            parent,
            names: None,
        })
    }

    pub fn with_names(
        parent: Vec<Option<usize>>,
        names: Vec<String>,
    ) -> Result<Self, SkeletonError> {
        let mut s = Self::new(parent)?;
        if names.len() != s.len() {
            return Err(SkeletonError::NameCountMismatch {
                names: names.len(),
                joints: s.len(),
            });
        }
        s.names = Some(names);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects zero joints
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parent[joint]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn is_root(&self, joint: usize) -> bool {
        self.parent[joint].is_none()
    }

    pub fn root_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_none()).count()
    }

    /// Joints with no children, ascending.
    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.len()];
        for &p in self.parent.iter().flatten() {
            has_child[p] = true;
        }
        (0..self.len()).filter(|&i| !has_child[i]).collect()
    }

    /// Concatenates forests into one skeleton, offsetting parent indices.
    /// Names are dropped; batched forests are anonymous by construction.
    pub fn concat(parts: &[Skeleton]) -> Result<Self, SkeletonError> {
        let mut parent = Vec::with_capacity(parts.iter().map(Skeleton::len).sum());
        for part in parts {
            let offset = parent.len();
            parent.extend(part.parents().iter().map(|p| p.map(|p| p + offset)));
        }
        Skeleton::new(parent)
    }
}

/// Repairs an arbitrarily ordered parent list into preorder: roots in
/// ascending input order, each subtree contiguous, children of a joint in
/// ascending input order. Returns the skeleton plus `perm`, where
/// `perm[old_index] == new_index`.
pub fn reindex_topological(
    parent: &[Option<usize>],
) -> Result<(Skeleton, Vec<usize>), SkeletonError> {
    let len = parent.len();
    if len == 0 {
        return Err(SkeletonError::Empty);
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); len];
    let mut roots = Vec::new();
    for (joint, &p) in parent.iter().enumerate() {
        match p {
            None => roots.push(joint),
            Some(p) if p >= len => {
                return Err(SkeletonError::OutOfRange {
                    joint,
                    parent: p,
                    len,
                })
            }
            Some(p) if p == joint => return Err(SkeletonError::CycleDetected),
            Some(p) => children[p].push(joint),
        }
    }
    let mut perm = vec![usize::MAX; len];
    let mut order = Vec::with_capacity(len);
    let mut stack = Vec::new();
    for &root in &roots {
        stack.push(root);
        while let Some(old) = stack.pop() {
            perm[old] = order.len();
            order.push(old);
            // Reverse push so the smallest child index is visited first.
            for &c in children[old].iter().rev() {
                stack.push(c);
            }
        }
    }
    if order.len() != len {
        // Unvisited joints hang off a parent cycle.
        return Err(SkeletonError::CycleDetected);
    }
    let mut new_parent = vec![None; len];
    for (old, &p) in parent.iter().enumerate() {
        new_parent[perm[old]] = p.map(|p| perm[p]);
    }
    let skeleton = Skeleton::new(new_parent)?;
    Ok((skeleton, perm))
}

/// Depth of every joint (roots at 0) plus the forest maximum.
#[derive(Clone, Debug)]
pub struct DepthMap {
    depth: Vec<u32>,
    max_depth: usize,
}

impl DepthMap {
    pub fn new(skeleton: &Skeleton) -> Self {
        let n = skeleton.len();
        let mut depth = vec![0u32; n];
        let mut max_depth = 0;
        for i in 0..n {
            if let Some(p) = skeleton.parent(i) {
                depth[i] = depth[p] + 1;
                max_depth = max_depth.max(depth[i] as usize);
            }
        }
        DepthMap { depth, max_depth }
    }

    pub fn depth(&self, joint: usize) -> usize {
        self.depth[joint] as usize
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

/// Packed table of power-of-two ancestors: level `k` holds each joint's
/// `2^k`-th ancestor. Level 0 is the parent column; higher levels compose two
/// hops of the level below.
#[derive(Clone, Debug)]
pub struct LiftTable {
    n: usize,
    levels: usize,
    table: Vec<u32>,
}

impl LiftTable {
    pub fn new(skeleton: &Skeleton) -> Self {
        let max_depth = DepthMap::new(skeleton).max_depth();
        // floor(log2(max_depth)) + 1 levels reach any ancestor by binary
        // decomposition; a flat forest still stores the all-empty parent
        // column.
        let levels = (usize::BITS - max_depth.max(1).leading_zeros()) as usize;
        Self::build(skeleton, levels, None)
    }

    /// Variant that refuses to cross block boundaries: an ancestor lying in a
    /// different block (by `block_of = joint / block_size`) is absent.
    fn new_in_block(skeleton: &Skeleton, block_size: usize, levels: usize) -> Self {
        Self::build(skeleton, levels, Some(block_size))
    }

    fn build(skeleton: &Skeleton, levels: usize, block_size: Option<usize>) -> Self {
        let n = skeleton.len();
        let mut table = vec![NONE; n * levels];
        for i in 0..n {
            if let Some(p) = skeleton.parent(i) {
                let same_block = block_size.is_none_or(|bs| p / bs == i / bs);
                if same_block {
                    table[i * levels] = p as u32;
                }
            }
        }
        for k in 1..levels {
            for i in 0..n {
                let half = table[i * levels + k - 1];
                if half != NONE {
                    table[i * levels + k] = table[half as usize * levels + k - 1];
                }
            }
        }
        LiftTable { n, levels, table }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// The `2^k`-th ancestor of `joint`, if it exists (and, for the in-block
    /// variant, lies in the same block).
    pub fn ancestor(&self, joint: usize, k: usize) -> Option<usize> {
        if k >= self.levels {
            return None;
        }
        match self.table[joint * self.levels + k] {
            NONE => None,
            a => Some(a as usize),
        }
    }

    /// The `hops`-th ancestor by binary decomposition of `hops`; `None` when
    /// the chain above `joint` is shorter than that.
    pub fn multi_parent(&self, joint: usize, hops: usize) -> Result<Option<usize>, SkeletonError> {
        if joint >= self.n {
            return Err(SkeletonError::IndexOutOfRange {
                index: joint,
                len: self.n,
            });
        }
        let mut cur = joint;
        let mut remaining = hops;
        let mut k = 0;
        while remaining > 0 {
            if remaining & 1 == 1 {
                match self.ancestor(cur, k) {
                    Some(a) => cur = a,
                    None => return Ok(None),
                }
            }
            remaining >>= 1;
            k += 1;
        }
        Ok(Some(cur))
    }
}

/// Fixed-size partition of the joint index range into blocks, with the
/// per-joint link used to stitch block-local results together:
/// `max_parent_out_block[i]` is the nearest ancestor of `i` in a different
/// block.
#[derive(Clone, Debug)]
pub struct BlockLayout {
    block_size: usize,
    block_of: Vec<u32>,
    max_parent_out_block: Vec<u32>,
    in_block: LiftTable,
}

impl BlockLayout {
    pub fn new(skeleton: &Skeleton, block_size: usize) -> Result<Self, SkeletonError> {
        if block_size < 2 {
            return Err(SkeletonError::InvalidBlockSize { block_size });
        }
        let n = skeleton.len();
        let mut block_of = vec![0u32; n];
        for (i, b) in block_of.iter_mut().enumerate() {
            *b = (i / block_size) as u32;
        }
        // parent out of block, or inherit the parent's link: the chain inside
        // a block is contiguous in ancestry, so the nearest out-of-block
        // ancestor is shared.
        let mut max_parent_out_block = vec![NONE; n];
        for i in 0..n {
            if let Some(p) = skeleton.parent(i) {
                max_parent_out_block[i] = if block_of[p] != block_of[i] {
                    p as u32
                } else {
                    max_parent_out_block[p]
                };
            }
        }
        let levels = block_size.next_power_of_two().trailing_zeros() as usize;
        let in_block = LiftTable::new_in_block(skeleton, block_size, levels.max(1));
        Ok(BlockLayout {
            block_size,
            block_of,
            max_parent_out_block,
            in_block,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block_of(&self, joint: usize) -> usize {
        self.block_of[joint] as usize
    }

    pub fn max_parent_out_block(&self, joint: usize) -> Option<usize> {
        match self.max_parent_out_block[joint] {
            NONE => None,
            p => Some(p as usize),
        }
    }

    /// Power-of-two ancestor table clamped to block boundaries. Its level
    /// count is `ceil(log2(block_size))`, enough to cover any chain that fits
    /// in one block.
    pub fn in_block(&self) -> &LiftTable {
        &self.in_block
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> Skeleton {
        Skeleton::new((0..n).map(|i| i.checked_sub(1)).collect()).unwrap()
    }

    #[test]
    fn build_rejects_empty() {
        assert_eq!(Skeleton::new(vec![]), Err(SkeletonError::Empty));
    }

    #[test]
    fn build_rejects_forward_parent() {
        assert_eq!(
            Skeleton::new(vec![Some(1), None]),
            Err(SkeletonError::ForwardParent {
                joint: 0,
                parent: 1
            })
        );
    }

    #[test]
    fn build_rejects_out_of_range_parent() {
        assert_eq!(
            Skeleton::new(vec![None, Some(7)]),
            Err(SkeletonError::OutOfRange {
                joint: 1,
                parent: 7,
                len: 2
            })
        );
    }

    #[test]
    fn build_rejects_self_loop() {
        assert_eq!(
            Skeleton::new(vec![Some(0)]),
            Err(SkeletonError::CycleDetected)
        );
    }

    #[test]
    fn names_must_match_joint_count() {
        assert_eq!(
            Skeleton::with_names(vec![None], vec!["a".into(), "b".into()]),
            Err(SkeletonError::NameCountMismatch {
                names: 2,
                joints: 1
            })
        );
    }

    #[test]
    fn reindex_shared_parent_example() {
        let (skel, perm) = reindex_topological(&[Some(2), Some(2), None]).unwrap();
        assert_eq!(skel.parents(), &[None, Some(0), Some(0)]);
        assert_eq!(perm, vec![1, 2, 0]);
    }

    #[test]
    fn reindex_swapped_pair_example() {
        let (skel, perm) = reindex_topological(&[Some(1), None]).unwrap();
        assert_eq!(skel.parents(), &[None, Some(0)]);
        assert_eq!(perm, vec![1, 0]);
    }

    #[test]
    fn reindex_detects_two_cycle() {
        assert_eq!(
            reindex_topological(&[Some(1), Some(0)]),
            Err(SkeletonError::CycleDetected)
        );
    }

    #[test]
    fn reindex_detects_cycle_with_tail() {
        // 2 -> 1 -> 0 -> 1 cycle, joint 3 hangs off it.
        assert_eq!(
            reindex_topological(&[Some(1), Some(0), Some(1), Some(2)]),
            Err(SkeletonError::CycleDetected)
        );
    }

    #[test]
    fn depths_on_chain_and_star() {
        let d = DepthMap::new(&chain(5));
        assert_eq!(
            (0..5).map(|i| d.depth(i)).collect::<Vec<_>>(),
            [0, 1, 2, 3, 4]
        );
        assert_eq!(d.max_depth(), 4);

        let star = Skeleton::new(vec![None, Some(0), Some(0), Some(0)]).unwrap();
        let d = DepthMap::new(&star);
        assert_eq!(d.max_depth(), 1);
    }

    #[test]
    fn lift_table_chain_example() {
        let skel = chain(5);
        let lift = LiftTable::new(&skel);
        assert_eq!(lift.levels(), 3);
        assert_eq!(lift.ancestor(4, 0), Some(3));
        assert_eq!(lift.ancestor(4, 1), Some(2));
        assert_eq!(lift.ancestor(4, 2), Some(0));
        assert_eq!(lift.ancestor(0, 0), None);
    }

    #[test]
    fn multi_parent_chain_example() {
        let lift = LiftTable::new(&chain(5));
        assert_eq!(lift.multi_parent(4, 3), Ok(Some(1)));
        assert_eq!(lift.multi_parent(4, 4), Ok(Some(0)));
        assert_eq!(lift.multi_parent(4, 5), Ok(None));
        assert_eq!(lift.multi_parent(0, 1), Ok(None));
        assert_eq!(lift.multi_parent(2, 0), Ok(Some(2)));
        assert_eq!(
            lift.multi_parent(9, 1),
            Err(SkeletonError::IndexOutOfRange { index: 9, len: 5 })
        );
    }

    #[test]
    fn block_layout_chain_130() {
        let skel = chain(130);
        let layout = BlockLayout::new(&skel, 64).unwrap();
        assert_eq!(layout.block_of(70), 1);
        assert_eq!(layout.max_parent_out_block(70), Some(63));
        assert_eq!(layout.max_parent_out_block(5), None);
        assert_eq!(layout.max_parent_out_block(129), Some(127));
        assert_eq!(layout.in_block().levels(), 6);
        assert_eq!(layout.in_block().ancestor(70, 0), Some(69));
        // Parent exists but sits in the previous block.
        assert_eq!(layout.in_block().ancestor(64, 0), None);
        assert_eq!(layout.in_block().ancestor(127, 5), Some(95));
    }

    #[test]
    fn block_size_must_be_at_least_two() {
        let skel = chain(4);
        for bs in [0, 1] {
            assert_eq!(
                BlockLayout::new(&skel, bs).unwrap_err(),
                SkeletonError::InvalidBlockSize { block_size: bs }
            );
        }
    }

    #[test]
    fn concat_offsets_parents() {
        let forest = Skeleton::concat(&[chain(3), chain(3)]).unwrap();
        assert_eq!(
            forest.parents(),
            &[None, Some(0), Some(1), None, Some(3), Some(4)]
        );
        assert_eq!(forest.root_count(), 2);
    }

    #[test]
    fn leaves_of_mixed_forest() {
        let skel = Skeleton::new(vec![None, Some(0), Some(0), Some(2), None]).unwrap();
        assert_eq!(skel.leaves(), vec![1, 3, 4]);
    }

    /// Walks parent links one step at a time; reference for the packed
    /// tables.
    fn brute_ancestor(skel: &Skeleton, joint: usize, hops: usize) -> Option<usize> {
        let mut cur = joint;
        for _ in 0..hops {
            cur = skel.parent(cur)?;
        }
        Some(cur)
    }

    fn random_topological_forest(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<usize>> {
        (0..n)
            .map(|i| {
                if i > 0 && rng.random_bool(0.9) {
                    Some(rng.random_range(0..i))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Relabels a topological forest with a random permutation, producing an
    /// arbitrarily ordered but acyclic parent list.
    fn shuffle_forest(rng: &mut ChaCha8Rng, parent: &[Option<usize>]) -> Vec<Option<usize>> {
        let n = parent.len();
        let mut sigma: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            sigma.swap(i, j);
        }
        let mut out = vec![None; n];
        for (i, &p) in parent.iter().enumerate() {
            out[sigma[i]] = p.map(|p| sigma[p]);
        }
        out
    }

    proptest! {
        #[test]
        fn reindex_restores_order_and_preserves_structure(seed in 0u64..1000, n in 1usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ordered = random_topological_forest(&mut rng, n);
            let shuffled = shuffle_forest(&mut rng, &ordered);
            let (skel, perm) = reindex_topological(&shuffled).unwrap();
            for (old, &p) in shuffled.iter().enumerate() {
                // Conjugation: the parent relation commutes with perm.
                prop_assert_eq!(skel.parent(perm[old]), p.map(|p| perm[p]));
                if let Some(p) = p {
                    prop_assert!(perm[p] < perm[old]);
                }
            }
            let before = DepthMap::new(&Skeleton::new(ordered).unwrap());
            let after = DepthMap::new(&skel);
            prop_assert_eq!(before.max_depth(), after.max_depth());
        }

        #[test]
        fn lift_table_matches_single_step_walk(seed in 0u64..500, n in 1usize..80) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let skel = Skeleton::new(random_topological_forest(&mut rng, n)).unwrap();
            let lift = LiftTable::new(&skel);
            for i in 0..n {
                for k in 0..lift.levels() {
                    prop_assert_eq!(lift.ancestor(i, k), brute_ancestor(&skel, i, 1 << k));
                }
                for hops in 0..(n + 1) {
                    prop_assert_eq!(lift.multi_parent(i, hops).unwrap(), brute_ancestor(&skel, i, hops));
                }
            }
        }

        #[test]
        fn block_layout_matches_walk(seed in 0u64..500, n in 1usize..150, bs in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let skel = Skeleton::new(random_topological_forest(&mut rng, n)).unwrap();
            let layout = BlockLayout::new(&skel, bs).unwrap();
            for i in 0..n {
                prop_assert_eq!(layout.block_of(i), i / bs);
                // First ancestor in a different block, by direct walk.
                let mut cur = skel.parent(i);
                while let Some(p) = cur {
                    if p / bs != i / bs {
                        break;
                    }
                    cur = skel.parent(p);
                }
                prop_assert_eq!(layout.max_parent_out_block(i), cur);
                for k in 0..layout.in_block().levels() {
                    let expect = brute_ancestor(&skel, i, 1 << k)
                        .filter(|&a| a / bs == i / bs);
                    prop_assert_eq!(layout.in_block().ancestor(i, k), expect);
                }
            }
        }
    }
}
