//! Exhaustive minimum-contraction search for small graphs.
//!
//! Deliberately shares no code with the greedy contraction: it has its own
//! union-find and parity check, so it can be used to audit it.

use serde::{Deserialize, Serialize};

use crate::contact_graph::ContactGraph;
use crate::error::{Error, Result};

pub const ORACLE_MAX_VERTICES: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Fewest contracted edges that make the graph bipartite.
    pub min_cardinality: usize,
    /// Smallest total weight among plans of that size.
    pub min_weight: f64,
    /// Every plan of minimum size, as sorted edge-index lists.
    pub plans: Vec<Vec<usize>>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// True when contracting the edges in `mask` leaves a bipartite graph.
pub fn contraction_is_bipartite(g: &ContactGraph, mask: u64) -> bool {
    let n = g.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, e) in g.edges.iter().enumerate() {
        if mask >> i & 1 == 1 {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            parent[a] = b;
        }
    }
    // parity union-find over the contracted groups
    let mut pp: Vec<usize> = (0..n).collect();
    let mut parity = vec![0u8; n];
    fn root(pp: &mut Vec<usize>, parity: &mut Vec<u8>, x: usize) -> (usize, u8) {
        if pp[x] == x {
            return (x, 0);
        }
        let (r, p) = root(pp, parity, pp[x]);
        parity[x] ^= p;
        pp[x] = r;
        (r, parity[x])
    }
    for (i, e) in g.edges.iter().enumerate() {
        if mask >> i & 1 == 1 {
            continue;
        }
        let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if a == b {
            continue;
        }
        let (ra, pa) = root(&mut pp, &mut parity, a);
        let (rb, pb) = root(&mut pp, &mut parity, b);
        if ra == rb {
            if pa == pb {
                return false;
            }
        } else {
            pp[ra] = rb;
            parity[ra] = pa ^ pb ^ 1;
        }
    }
    true
}

/// Tries edge subsets by increasing size and stops at the first size that
/// works. Limited to graphs with at most [`ORACLE_MAX_VERTICES`] vertices.
pub fn brute_force_min_contraction(g: &ContactGraph) -> Result<OracleResult> {
    let n = g.num_vertices();
    if n > ORACLE_MAX_VERTICES {
        return Err(Error::SizeLimit {
            vertices: n,
            limit: ORACLE_MAX_VERTICES,
        });
    }
    let m = g.num_edges();
    for k in 0..=m {
        let mut plans = Vec::new();
        let mut best = f64::INFINITY;
        for_each_subset(m, k, |mask| {
            if contraction_is_bipartite(g, mask) {
                let edges: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
                let w: f64 = edges.iter().map(|&i| g.edges[i].weight).sum();
                best = best.min(w);
                plans.push(edges);
            }
        });
        if !plans.is_empty() {
            return Ok(OracleResult {
                min_cardinality: k,
                min_weight: best,
                plans,
            });
        }
    }
    unreachable!("contracting every edge always leaves a bipartite graph")
}

/// Calls `f` on every `m`-bit mask with exactly `k` bits set, in increasing order.
fn for_each_subset(m: usize, k: usize, mut f: impl FnMut(u64)) {
    if k == 0 {
        f(0);
        return;
    }
    if k > m {
        return;
    }
    let limit = 1u64 << m;
    let mut mask = (1u64 << k) - 1;
    while mask < limit {
        f(mask);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
}
