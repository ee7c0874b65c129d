//! Assignment of contracted part groups to the two volumes.

use serde::{Deserialize, Serialize};

use crate::bipartite_contraction::ContractionPlan;
use crate::contact_graph::ContactGraph;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeAssignment {
    pub plan: ContractionPlan,
    /// Part ids of each merged group.
    pub groups: Vec<Vec<usize>>,
    /// Volume (0 or 1) of each group.
    pub color: Vec<u8>,
    /// Components of the contracted graph (group indices), in the order they
    /// were balanced, with the flip chosen for each.
    pub components: Vec<Vec<usize>>,
    pub component_flips: Vec<bool>,
    /// Volume of each part id.
    pub part_volume: Vec<u8>,
    /// Summed part occupancy per volume.
    pub volume_occupancy: [u64; 2],
}

impl VolumeAssignment {
    pub fn groups_in(&self, volume: u8) -> Vec<usize> {
        (0..self.groups.len()).filter(|&g| self.color[g] == volume).collect()
    }

    pub fn parts_in(&self, volume: u8) -> Vec<usize> {
        (0..self.part_volume.len()).filter(|&p| self.part_volume[p] == volume).collect()
    }

    pub fn group_of_part(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.part_volume.len()];
        for (gi, parts) in self.groups.iter().enumerate() {
            for &p in parts {
                out[p] = gi;
            }
        }
        out
    }
}

/// Two-colors every component of the contracted graph and picks each
/// component's orientation, largest first, to even out the occupancy of the
/// two volumes. Edgeless groups take part in the same balancing.
pub fn assign_volumes(g: &ContactGraph, plan: &ContractionPlan, part_voxel_counts: &[usize]) -> Result<VolumeAssignment> {
    let contracted = plan.apply(g);
    let (base, conflicts) = contracted.bfs_coloring();
    if !conflicts.is_empty() {
        return Err(Error::Validation(format!(
            "contraction plan leaves {} conflicting edges",
            conflicts.len()
        )));
    }
    let num_parts: usize = contracted.vertex_parts.iter().map(Vec::len).sum();
    if part_voxel_counts.len() != num_parts {
        return Err(Error::Validation(format!(
            "{} voxel counts for {num_parts} parts",
            part_voxel_counts.len()
        )));
    }
    let group_occ: Vec<u64> = contracted
        .vertex_parts
        .iter()
        .map(|parts| parts.iter().map(|&p| part_voxel_counts[p] as u64).sum())
        .collect();

    let mut components: Vec<(Vec<usize>, [u64; 2])> = contracted
        .components()
        .into_iter()
        .map(|comp| {
            let mut sides = [0u64; 2];
            for &gi in &comp {
                sides[base[gi] as usize] += group_occ[gi];
            }
            (comp, sides)
        })
        .collect();
    // largest first; ties keep the smallest group first
    components.sort_by(|a, b| (b.1[0] + b.1[1]).cmp(&(a.1[0] + a.1[1])).then(a.0[0].cmp(&b.0[0])));

    let mut totals = [0u64; 2];
    let mut color = base.clone();
    let mut flips = Vec::with_capacity(components.len());
    for (comp, sides) in &components {
        let keep = (totals[0] + sides[0]).abs_diff(totals[1] + sides[1]);
        let flip = (totals[0] + sides[1]).abs_diff(totals[1] + sides[0]);
        let flipped = flip < keep;
        if flipped {
            totals[0] += sides[1];
            totals[1] += sides[0];
            for &gi in comp {
                color[gi] = 1 - color[gi];
            }
        } else {
            totals[0] += sides[0];
            totals[1] += sides[1];
        }
        flips.push(flipped);
    }

    let mut part_volume = vec![0u8; num_parts];
    for (gi, parts) in contracted.vertex_parts.iter().enumerate() {
        for &p in parts {
            part_volume[p] = color[gi];
        }
    }
    let assignment = VolumeAssignment {
        plan: plan.clone(),
        groups: contracted.vertex_parts.clone(),
        color,
        components: components.into_iter().map(|(c, _)| c).collect(),
        component_flips: flips,
        part_volume,
        volume_occupancy: totals,
    };
    debug_assert!(contracted.edges.iter().all(|e| assignment.color[e.u] != assignment.color[e.v]));
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite_contraction::{bipartize, fallback_two_coloring};

    #[test]
    fn path_alternates() {
        let g = ContactGraph::from_edges(5, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let plan = bipartize(&g, 100);
        let a = assign_volumes(&g, &plan, &[10; 5]).unwrap();
        assert_eq!(a.parts_in(0), vec![0, 2, 4]);
        assert_eq!(a.parts_in(1), vec![1, 3]);
    }

    #[test]
    fn isolated_parts_are_balanced() {
        let g = ContactGraph::from_edges(2, []).unwrap();
        let a = assign_volumes(&g, &bipartize(&g, 100), &[7, 7]).unwrap();
        assert_eq!(a.part_volume, vec![0, 1]);
        assert_eq!(a.volume_occupancy, [7, 7]);
    }

    #[test]
    fn single_part_leaves_volume_one_empty() {
        let g = ContactGraph::from_edges(1, []).unwrap();
        let a = assign_volumes(&g, &bipartize(&g, 100), &[100]).unwrap();
        assert_eq!(a.part_volume, vec![0]);
        assert_eq!(a.volume_occupancy, [100, 0]);
    }

    #[test]
    fn largest_components_placed_first() {
        // one heavy isolated part, a light pair, another light isolated part
        let g = ContactGraph::from_edges(4, [(1, 2, 1.0)]).unwrap();
        let a = assign_volumes(&g, &bipartize(&g, 100), &[10, 3, 4, 5]).unwrap();
        assert_eq!(a.components[0], vec![0]);
        assert_eq!(a.volume_occupancy, [13, 9]);
    }

    #[test]
    fn rejects_unverified_plans() {
        let g = ContactGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let mut plan = fallback_two_coloring(&g);
        plan.contracted_edges.clear();
        assert!(assign_volumes(&g, &plan, &[1, 1, 1]).is_err());
    }
}
