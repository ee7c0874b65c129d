//! Edge contraction that turns a contact graph into a bipartite one.
//!
//! Small graphs (fewer than `edge_limit` edges) go through greedy odd-cycle
//! contraction: every simple cycle is enumerated once, and each odd cycle
//! contracts its heaviest surviving edge until no odd cycle remains. Larger
//! graphs are two-colored directly and every conflicting edge is contracted.
//! Either way the resulting plan is applied and re-verified; leftover
//! conflicts are contracted as `conflict_fallback`.

use serde::{Deserialize, Serialize};

use crate::contact_graph::{ContactGraph, Edge};
use crate::error::{Error, Result};

pub const DEFAULT_EDGE_LIMIT: usize = 100;
/// Enumeration stops and the fallback path is taken beyond this many cycles.
pub const DEFAULT_CYCLE_LIMIT: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionReason {
    OddCycle,
    ConflictFallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GreedyOddCycle,
    TwoColoring,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractedEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub reason: ContractionReason,
}

/// Ordered list of contracted input edges plus the resulting part groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionPlan {
    pub strategy: Strategy,
    pub contracted_edges: Vec<ContractedEdge>,
    pub resulting_groups: Vec<Vec<usize>>,
}

impl ContractionPlan {
    pub fn len(&self) -> usize {
        self.contracted_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracted_edges.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.contracted_edges.iter().map(|e| e.weight).sum()
    }

    /// The contracted graph this plan produces on `g`.
    pub fn apply(&self, g: &ContactGraph) -> ContactGraph {
        contract(g, self.contracted_edges.iter().map(|e| (e.u, e.v)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A simple cycle as a closed vertex walk and the indices of its edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_odd(&self) -> bool {
        self.edges.len() % 2 == 1
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the larger root into the smaller one.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Contracts the given vertex pairs of `g`: endpoints merge into the smaller
/// id, self-loops vanish and parallel edges keep their maximum weight. Groups
/// are ordered by their smallest member vertex.
pub fn contract(g: &ContactGraph, pairs: impl IntoIterator<Item = (usize, usize)>) -> ContactGraph {
    let n = g.num_vertices();
    let mut ds = DisjointSets::new(n);
    for (a, b) in pairs {
        ds.union(a, b);
    }
    let roots: Vec<usize> = (0..n).map(|x| ds.find(x)).collect();
    let mut group_index = vec![usize::MAX; n];
    let mut vertex_parts: Vec<Vec<usize>> = Vec::new();
    for (x, &r) in roots.iter().enumerate() {
        if group_index[r] == usize::MAX {
            group_index[r] = vertex_parts.len();
            vertex_parts.push(Vec::new());
        }
        vertex_parts[group_index[r]].extend_from_slice(&g.vertex_parts[x]);
    }
    for parts in &mut vertex_parts {
        parts.sort_unstable();
    }
    let edges = g
        .edges
        .iter()
        .map(|e| (group_index[roots[e.u]], group_index[roots[e.v]], e.weight));
    let mut out = ContactGraph::from_edges(vertex_parts.len(), edges).expect("contracted edges stay valid");
    out.vertex_parts = vertex_parts;
    out.dilation_voxels = g.dilation_voxels;
    out.degenerate_parts = g.degenerate_parts.clone();
    out
}

/// Calls `visit(vertices, edges)` once per simple cycle. A cycle is reported
/// from its smallest vertex, in the direction whose second vertex is smaller
/// than its last. Returns false if `visit` asked to stop.
fn for_each_cycle(g: &ContactGraph, mut visit: impl FnMut(&[usize], &[usize]) -> bool) -> bool {
    let adj = g.adjacency();
    let n = g.num_vertices();
    let mut on_path = vec![false; n];
    let mut path: Vec<usize> = Vec::with_capacity(n);
    let mut path_edges: Vec<usize> = Vec::with_capacity(n);
    // explicit stack of (vertex, next adjacency slot)
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);
    for s in 0..n {
        path.clear();
        path_edges.clear();
        path.push(s);
        on_path[s] = true;
        stack.push((s, 0));
        while let Some(&(x, slot)) = stack.last() {
            if slot < adj[x].len() {
                let (y, e) = adj[x][slot];
                stack.last_mut().unwrap().1 += 1;
                if y == s {
                    if path.len() >= 3 && path[1] < *path.last().unwrap() {
                        path_edges.push(e);
                        let keep_going = visit(&path, &path_edges);
                        path_edges.pop();
                        if !keep_going {
                            for &v in &path {
                                on_path[v] = false;
                            }
                            return false;
                        }
                    }
                } else if y > s && !on_path[y] {
                    on_path[y] = true;
                    path.push(y);
                    path_edges.push(e);
                    stack.push((y, 0));
                }
            } else {
                stack.pop();
                let v = path.pop().unwrap();
                on_path[v] = false;
                path_edges.pop();
            }
        }
    }
    true
}

/// Every simple cycle of `g`, each exactly once.
pub fn enumerate_simple_cycles(g: &ContactGraph, edge_limit: usize) -> Result<Vec<Cycle>> {
    if g.num_edges() >= edge_limit {
        return Err(Error::EdgeLimit {
            edges: g.num_edges(),
            limit: edge_limit,
        });
    }
    let mut cycles = Vec::new();
    for_each_cycle(g, |vs, es| {
        cycles.push(Cycle {
            vertices: vs.to_vec(),
            edges: es.to_vec(),
        });
        true
    });
    Ok(cycles)
}

/// Cycles as packed edge bitmasks, or `None` past `cycle_limit`.
struct CycleMasks {
    words: usize,
    bits: Vec<u64>,
}

impl CycleMasks {
    fn collect(g: &ContactGraph, cycle_limit: usize) -> Option<Self> {
        let words = g.num_edges().div_ceil(64).max(1);
        let mut bits = Vec::new();
        let mut count = 0usize;
        let complete = for_each_cycle(g, |_, es| {
            let base = bits.len();
            bits.resize(base + words, 0);
            for &e in es {
                bits[base + e / 64] |= 1 << (e % 64);
            }
            count += 1;
            count <= cycle_limit
        });
        complete.then_some(CycleMasks { words, bits })
    }

    fn len(&self) -> usize {
        self.bits.len() / self.words
    }

    fn cycle(&self, c: usize) -> &[u64] {
        &self.bits[c * self.words..(c + 1) * self.words]
    }

    fn count(&self, c: usize) -> u32 {
        self.cycle(c).iter().map(|w| w.count_ones()).sum()
    }

    fn remove(&mut self, removed: &[u64]) {
        for chunk in self.bits.chunks_mut(self.words) {
            for (w, r) in chunk.iter_mut().zip(removed) {
                *w &= !r;
            }
        }
    }
}

fn mask_edges(mask: &[u64]) -> impl Iterator<Item = usize> + '_ {
    mask.iter().enumerate().flat_map(|(wi, &w)| {
        let mut bits = w;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(wi * 64 + b)
        })
    })
}

/// Heaviest edge; ties go to the smallest `(u, v)`, i.e. the smallest index.
fn heaviest(edges: &[Edge], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for e in candidates {
        match best {
            Some(b) if edges[e].weight <= edges[b].weight && !(edges[e].weight == edges[b].weight && e < b) => {}
            _ => best = Some(e),
        }
    }
    best
}

/// Greedy odd-cycle contraction with terminal verification.
///
/// After an edge is contracted, every cycle loses that edge and any other
/// edge whose endpoints now lie in the same group; cycles left with fewer than
/// three edges are ignored.
pub fn greedy_odd_cycle_contraction(g: &ContactGraph, edge_limit: usize) -> Result<ContractionPlan> {
    greedy_with_cycle_limit(g, edge_limit, DEFAULT_CYCLE_LIMIT)
}

pub fn greedy_with_cycle_limit(g: &ContactGraph, edge_limit: usize, cycle_limit: usize) -> Result<ContractionPlan> {
    if g.num_edges() >= edge_limit {
        return Err(Error::EdgeLimit {
            edges: g.num_edges(),
            limit: edge_limit,
        });
    }
    let Some(mut cycles) = CycleMasks::collect(g, cycle_limit) else {
        log::warn!(
            "more than {cycle_limit} simple cycles in a graph with {} edges; two-coloring instead",
            g.num_edges()
        );
        return Ok(fallback_two_coloring(g));
    };
    let edges = &g.edges;
    let mut ds = DisjointSets::new(g.num_vertices());
    let mut removed = vec![0u64; cycles.words];
    let mut plan: Vec<ContractedEdge> = Vec::new();
    loop {
        let mut found_odd = false;
        for c in 0..cycles.len() {
            let count = cycles.count(c);
            if count < 3 || count % 2 == 0 {
                continue;
            }
            found_odd = true;
            let e = heaviest(edges, mask_edges(cycles.cycle(c))).expect("odd cycle has edges");
            let edge = edges[e];
            plan.push(ContractedEdge {
                u: edge.u,
                v: edge.v,
                weight: edge.weight,
                reason: ContractionReason::OddCycle,
            });
            ds.union(edge.u, edge.v);
            let mut newly = vec![0u64; cycles.words];
            for (i, other) in edges.iter().enumerate() {
                let bit = 1u64 << (i % 64);
                if removed[i / 64] & bit == 0 && ds.find(other.u) == ds.find(other.v) {
                    newly[i / 64] |= bit;
                    removed[i / 64] |= bit;
                }
            }
            cycles.remove(&newly);
        }
        if !found_odd {
            break;
        }
    }
    Ok(finish(g, plan, Strategy::GreedyOddCycle))
}

/// Two-colors by BFS and contracts every conflicting edge, repeating until
/// the coloring is proper.
pub fn fallback_two_coloring(g: &ContactGraph) -> ContractionPlan {
    finish(g, Vec::new(), Strategy::TwoColoring)
}

/// Applies `plan`, then contracts remaining conflicts until a proper
/// two-coloring exists.
fn finish(g: &ContactGraph, mut plan: Vec<ContractedEdge>, strategy: Strategy) -> ContractionPlan {
    loop {
        let contracted = contract(g, plan.iter().map(|e| (e.u, e.v)));
        let (_, conflicts) = contracted.bfs_coloring();
        if conflicts.is_empty() {
            return ContractionPlan {
                strategy,
                contracted_edges: plan,
                resulting_groups: contracted.vertex_parts,
            };
        }
        // map each conflicting group edge back to its heaviest input edge
        let group_of = vertex_groups(g, &contracted);
        for ci in conflicts {
            let ce = contracted.edges[ci];
            let candidates = g
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| {
                    let (a, b) = (group_of[e.u], group_of[e.v]);
                    (a.min(b), a.max(b)) == (ce.u, ce.v)
                })
                .map(|(i, _)| i);
            let e = heaviest(&g.edges, candidates).expect("group edge comes from an input edge");
            let edge = g.edges[e];
            plan.push(ContractedEdge {
                u: edge.u,
                v: edge.v,
                weight: edge.weight,
                reason: ContractionReason::ConflictFallback,
            });
        }
    }
}

/// Index of the contracted vertex holding each vertex of `g`.
fn vertex_groups(g: &ContactGraph, contracted: &ContactGraph) -> Vec<usize> {
    let mut part_group = std::collections::HashMap::new();
    for (gi, parts) in contracted.vertex_parts.iter().enumerate() {
        for &p in parts {
            part_group.insert(p, gi);
        }
    }
    g.vertex_parts.iter().map(|parts| part_group[&parts[0]]).collect()
}

/// Greedy contraction below `edge_limit` edges, two-coloring otherwise.
pub fn bipartize(g: &ContactGraph, edge_limit: usize) -> ContractionPlan {
    if g.num_edges() < edge_limit {
        greedy_odd_cycle_contraction(g, edge_limit).expect("edge limit checked")
    } else {
        fallback_two_coloring(g)
    }
}
