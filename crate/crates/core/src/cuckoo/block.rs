//! Block linked lists of abstract pair-ids.
//!
//! Each node packs up to [`BLOCK_CAPACITY`] ids, so an entity mapped to `m`
//! abstracts owns exactly `ceil(m / 3)` nodes. The first node sits inline in
//! the filter slot; overflow nodes live in an arena, link by index, and go
//! on a free list when released.

use crate::PairId;

pub const BLOCK_CAPACITY: usize = 3;

pub(crate) const NIL: u32 = u32::MAX;

/// Marks an unused id cell. Never a valid pair-id.
pub(crate) const EMPTY: PairId = PairId::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockNode {
    pair_ids: [PairId; BLOCK_CAPACITY],
    next: u32,
}

impl Default for BlockNode {
    fn default() -> Self {
        BlockNode {
            pair_ids: [EMPTY; BLOCK_CAPACITY],
            next: NIL,
        }
    }
}

impl BlockNode {
    pub(crate) fn with_first(pair_id: PairId) -> Self {
        BlockNode {
            pair_ids: [pair_id, EMPTY, EMPTY],
            next: NIL,
        }
    }

    pub fn len(&self) -> usize {
        self.pair_ids.iter().take_while(|&&id| id != EMPTY).count()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_ids[0] == EMPTY
    }

    /// Occupied ids, contiguous from slot 0.
    pub fn pair_ids(&self) -> &[PairId] {
        &self.pair_ids[..self.len()]
    }

    pub fn is_full(&self) -> bool {
        self.pair_ids[BLOCK_CAPACITY - 1] != EMPTY
    }

    fn push(&mut self, pair_id: PairId) {
        let n = self.len();
        self.pair_ids[n] = pair_id;
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct BlockArena {
    nodes: Vec<BlockNode>,
    free: Vec<u32>,
}

impl BlockArena {
    fn alloc(&mut self, first: PairId) -> u32 {
        let node = BlockNode::with_first(first);
        match self.free.pop() {
            Some(idx) => {
                self.nodes[idx as usize] = node;
                idx
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    /// `head` followed by its overflow chain.
    pub fn iter_nodes<'a>(&'a self, head: &'a BlockNode) -> impl Iterator<Item = &'a BlockNode> + 'a {
        let mut cur = Some(head);
        std::iter::from_fn(move || {
            let node = cur?;
            cur = (node.next != NIL).then(|| &self.nodes[node.next as usize]);
            Some(node)
        })
    }

    /// Appends `pair_id` unless already present. Returns whether it was added.
    pub fn push_unique(&mut self, head: &mut BlockNode, pair_id: PairId) -> bool {
        if self.iter_nodes(head).any(|n| n.pair_ids().contains(&pair_id)) {
            return false;
        }
        if head.next == NIL {
            if head.is_full() {
                head.next = self.alloc(pair_id);
            } else {
                head.push(pair_id);
            }
            return true;
        }
        let mut cur = head.next;
        while self.nodes[cur as usize].next != NIL {
            cur = self.nodes[cur as usize].next;
        }
        if self.nodes[cur as usize].is_full() {
            let fresh = self.alloc(pair_id);
            self.nodes[cur as usize].next = fresh;
        } else {
            self.nodes[cur as usize].push(pair_id);
        }
        true
    }

    /// Builds a list from ids already known to be distinct and non-empty.
    pub fn list_of(&mut self, ids: &[PairId]) -> BlockNode {
        let mut head = BlockNode::with_first(ids[0]);
        for &id in &ids[1..] {
            self.push_unique(&mut head, id);
        }
        head
    }

    pub fn collect_into(&self, head: &BlockNode, out: &mut Vec<PairId>) {
        for node in self.iter_nodes(head) {
            out.extend_from_slice(node.pair_ids());
        }
    }

    pub fn node_count(&self, head: &BlockNode) -> usize {
        self.iter_nodes(head).count()
    }

    pub fn id_count(&self, head: &BlockNode) -> usize {
        self.iter_nodes(head).map(BlockNode::len).sum()
    }

    /// Frees the overflow chain behind `head`.
    pub fn release(&mut self, head: &BlockNode) {
        let mut cur = head.next;
        while cur != NIL {
            let next = self.nodes[cur as usize].next;
            self.nodes[cur as usize] = BlockNode::default();
            self.free.push(cur);
            cur = next;
        }
    }

    /// Overflow nodes in use; inline head nodes are not counted here.
    pub fn live_nodes(&self) -> usize {
        self.nodes.len() - self.free.len()
    }
}
