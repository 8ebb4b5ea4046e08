// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{LinkId, Lsdb, NodeId, Topology, TopologyError};

/// Shortest-path tree toward `root`.
///
/// `next_hop[u]` is u's successor on a shortest path u -> root and `dist[u]`
/// its total metric. Unreachable nodes (and the root's next hop) are `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SptTree {
    pub root: NodeId,
    pub next_hop: Vec<Option<NodeId>>,
    pub dist: Vec<Option<u64>>,
}

impl SptTree {
    pub fn next_hop(&self, node: NodeId) -> Option<NodeId> {
        self.next_hop.get(node.index()).copied().flatten()
    }

    pub fn dist(&self, node: NodeId) -> Option<u64> {
        self.dist.get(node.index()).copied().flatten()
    }

    pub fn reaches(&self, node: NodeId) -> bool {
        self.dist(node).is_some()
    }

    /// Nodes other than the root that have a path to it, ascending.
    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.next_hop
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.map(|_| NodeId(i as u32)))
    }

    /// Walks next hops from `from` to the root, both inclusive.
    ///
    /// Returns `None` if `from` is unreachable or the walk exceeds the node
    /// count (which would mean a cycle).
    pub fn path_from(&self, from: NodeId) -> Option<Vec<NodeId>> {
        self.dist(from)?;
        let mut path = vec![from];
        let mut cur = from;
        while cur != self.root {
            cur = self.next_hop(cur)?;
            path.push(cur);
            if path.len() > self.next_hop.len() {
                return None;
            }
        }
        Some(path)
    }
}

/// Shortest-path tree toward `root` using the metrics of links oriented
/// toward the root.
///
/// Ties: nodes with equal tentative distance settle in ascending id order, and
/// among equal-cost successors the lowest id wins.
pub fn reverse_dijkstra(topology: &Topology, lsdb: &Lsdb, root: NodeId) -> Result<SptTree, TopologyError> {
    if root.index() >= topology.node_count() {
        return Err(TopologyError::UnknownNode(root));
    }
    if !topology.is_pe(root) {
        return Err(TopologyError::NotPe(root));
    }
    Ok(reverse_tree(topology, lsdb, root))
}

/// Reverse tree without the PE check. Used where any node may act as a root.
pub(crate) fn reverse_tree(topology: &Topology, lsdb: &Lsdb, root: NodeId) -> SptTree {
    let n = topology.node_count();
    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut next_hop: Vec<Option<NodeId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();

    dist[root.index()] = Some(0);
    heap.push(Reverse((0u64, root)));

    while let Some(Reverse((d, v))) = heap.pop() {
        if settled[v.index()] {
            continue;
        }
        settled[v.index()] = true;
        // every u with a link u -> v can reach the root through v
        for &lid in topology.in_links(v) {
            let u = topology.link(lid).from;
            if settled[u.index()] {
                continue;
            }
            let cand = d + lsdb.metric(lid);
            let better = match dist[u.index()] {
                None => true,
                Some(cur) => cand < cur || (cand == cur && next_hop[u.index()].is_some_and(|h| v < h)),
            };
            if better {
                dist[u.index()] = Some(cand);
                next_hop[u.index()] = Some(v);
                heap.push(Reverse((cand, u)));
            }
        }
    }

    SptTree { root, next_hop, dist }
}

/// Forward shortest-path tree from `source` (regular Dijkstra).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTree {
    pub source: NodeId,
    pub pred: Vec<Option<NodeId>>,
    pub dist: Vec<Option<u64>>,
}

impl SourceTree {
    /// Nodes from the source to `dst`, both inclusive.
    pub fn path_to(&self, dst: NodeId) -> Option<Vec<NodeId>> {
        self.dist.get(dst.index()).copied().flatten()?;
        let mut path = vec![dst];
        let mut cur = dst;
        while cur != self.source {
            cur = self.pred[cur.index()]?;
            path.push(cur);
            if path.len() > self.pred.len() {
                return None;
            }
        }
        path.reverse();
        Some(path)
    }
}

/// Regular Dijkstra from `source`, same tie-breaking as [`reverse_dijkstra`].
pub fn dijkstra_from(topology: &Topology, lsdb: &Lsdb, source: NodeId) -> Result<SourceTree, TopologyError> {
    if source.index() >= topology.node_count() {
        return Err(TopologyError::UnknownNode(source));
    }
    let n = topology.node_count();
    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut pred: Vec<Option<NodeId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source.index()] = Some(0);
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if settled[u.index()] {
            continue;
        }
        settled[u.index()] = true;
        for &lid in topology.out_links(u) {
            let v = topology.link(lid).to;
            if settled[v.index()] {
                continue;
            }
            let cand = d + lsdb.metric(lid);
            let better = match dist[v.index()] {
                None => true,
                Some(cur) => cand < cur || (cand == cur && pred[v.index()].is_some_and(|p| u < p)),
            };
            if better {
                dist[v.index()] = Some(cand);
                pred[v.index()] = Some(u);
                heap.push(Reverse((cand, v)));
            }
        }
    }
    Ok(SourceTree { source, pred, dist })
}

/// True iff both trees route every node through the same next hop.
pub fn trees_equal(a: &SptTree, b: &SptTree) -> Result<bool, TopologyError> {
    if a.root != b.root {
        return Err(TopologyError::RootMismatch(a.root, b.root));
    }
    Ok(a.next_hop == b.next_hop)
}

/// Directed links used by the tree, as `(node, link toward next hop)`.
pub fn tree_links(topology: &Topology, tree: &SptTree) -> Vec<(NodeId, LinkId)> {
    tree.members()
        .filter_map(|u| {
            let v = tree.next_hop(u)?;
            topology.find_link(u, v).map(|l| (u, l))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{load_topology, MetricClass, MetricValues, US_BACKBONE};

    fn two_node() -> (Topology, Lsdb) {
        let topo = load_topology("node 0 P\nnode 1 PE\nnode 2 PE\nlink 1 2 1e8 0 1\nlink 2 1 1e8 0 7\n").unwrap();
        let lsdb = Lsdb::new(&topo, MetricValues::default());
        (topo, lsdb)
    }

    #[test]
    fn reverse_uses_links_toward_root() {
        let (topo, lsdb) = two_node();
        let tree = reverse_dijkstra(&topo, &lsdb, NodeId(1)).unwrap();
        assert_eq!(tree.dist(NodeId(2)), Some(7));
        assert_eq!(tree.next_hop(NodeId(2)), Some(NodeId(1)));
        assert_eq!(tree.dist(NodeId(1)), Some(0));
        // isolated node 0 is absent
        assert_eq!(tree.dist(NodeId(0)), None);
        let fwd = dijkstra_from(&topo, &lsdb, NodeId(1)).unwrap();
        assert_eq!(fwd.dist[2], Some(1));
    }

    #[test]
    fn root_must_be_pe() {
        let (topo, lsdb) = two_node();
        assert_eq!(
            reverse_dijkstra(&topo, &lsdb, NodeId(0)),
            Err(TopologyError::NotPe(NodeId(0)))
        );
        assert_eq!(
            reverse_dijkstra(&topo, &lsdb, NodeId(5)),
            Err(TopologyError::UnknownNode(NodeId(5)))
        );
    }

    #[test]
    fn equal_cost_picks_lowest_next_hop() {
        // diamond 0 -> {1,2} -> 3, root 3
        let topo = load_topology(
            "node 0 PE\nnode 1 P\nnode 2 P\nnode 3 PE\nbilink 0 2 1e8 0 1\nbilink 0 1 1e8 0 1\nbilink 1 3 1e8 0 1\nbilink 2 3 1e8 0 1\n",
        )
        .unwrap();
        let lsdb = Lsdb::new(&topo, MetricValues::default());
        let tree = reverse_dijkstra(&topo, &lsdb, NodeId(3)).unwrap();
        assert_eq!(tree.next_hop(NodeId(0)), Some(NodeId(1)));
        assert_eq!(
            tree.path_from(NodeId(0)).unwrap(),
            vec![NodeId(0), NodeId(1), NodeId(3)]
        );
        let fwd = dijkstra_from(&topo, &lsdb, NodeId(0)).unwrap();
        assert_eq!(fwd.path_to(NodeId(3)).unwrap(), vec![NodeId(0), NodeId(1), NodeId(3)]);
    }

    #[test]
    fn trees_equal_cases() {
        let topo = load_topology(US_BACKBONE).unwrap();
        let mut lsdb = Lsdb::new(&topo, MetricValues::default());
        let root = topo.pes()[0];
        let a = reverse_dijkstra(&topo, &lsdb, root).unwrap();
        assert!(trees_equal(&a, &a).unwrap());

        // a link no shortest path uses: pick one whose metric change leaves the tree alone
        let used: std::collections::HashSet<LinkId> = tree_links(&topo, &a).into_iter().map(|(_, l)| l).collect();
        let unused = topo.link_ids().find(|l| !used.contains(l)).unwrap();
        lsdb.set_metric(unused, MetricClass::Cong).unwrap();
        let b = reverse_dijkstra(&topo, &lsdb, root).unwrap();
        assert!(trees_equal(&a, &b).unwrap());

        let mut c = a.clone();
        let m = c.members().next().unwrap();
        c.next_hop[m.index()] = Some(NodeId(38));
        assert!(!trees_equal(&a, &c).unwrap());

        let other = reverse_dijkstra(&topo, &lsdb, topo.pes()[1]).unwrap();
        assert!(trees_equal(&a, &other).is_err());
    }
}
