//! Three-stage giant-cluster resolution.
//!
//! Stage 1 assigns observations to cells at the configured resolution and
//! flags cells holding more than `giant_threshold` of all observations. Routes
//! are grouped by the cell holding the plurality of their observations (the
//! final assignment is route-level). Stage 2 splits giant clusters along the
//! route connectivity graph (edges where routes share a stop, weighted by
//! segment Jaccard) using greedy modularity maximization, validating each
//! community's cell footprint for edge-connectivity. Stage 3 merges
//! undersized clusters into their most similar neighbor and recursively
//! subdivides oversized ones, then relabels contiguously.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::louvain::{louvain, Graph};
use super::{
    cluster_metrics, distance_matrix, jaccard, linkage, weighted_jaccard, ClusterAssignment,
    ClusterConfig, ClusterError, RouteSimilarityInput,
};
use crate::domain::GeoPoint;
use crate::hexgrid::{cell_of, HexCell};

/// Minimal observation view needed by geographic clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterObservation {
    pub route_id: String,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub count: u64,
    /// Observations per km² of cell area.
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct Stage1Result {
    /// Per-observation cell, aligned with the input order.
    pub obs_cells: Vec<HexCell>,
    pub cell_stats: BTreeMap<HexCell, CellStats>,
    /// Cells holding more than `giant_threshold × total` observations.
    pub giant_cells: BTreeSet<HexCell>,
    /// Route → cell holding the plurality of the route's observations.
    pub route_dominant: BTreeMap<String, HexCell>,
    /// Cell → routes dominated by it (the stage-1 route clusters).
    pub clusters: BTreeMap<HexCell, Vec<String>>,
}

/// Stage 1: coarse geographic clustering with giant-cell identification.
pub fn stage1_geographic(
    observations: &[ClusterObservation],
    resolution: u8,
    giant_threshold: f64,
) -> Result<Stage1Result, ClusterError> {
    if observations.is_empty() {
        return Err(ClusterError::NoObservations);
    }
    let mut obs_cells = Vec::with_capacity(observations.len());
    let mut counts: BTreeMap<HexCell, u64> = BTreeMap::new();
    let mut route_cell_counts: BTreeMap<String, BTreeMap<HexCell, u64>> = BTreeMap::new();
    for obs in observations {
        let cell = cell_of(obs.location, resolution)?;
        obs_cells.push(cell);
        *counts.entry(cell).or_insert(0) += 1;
        *route_cell_counts
            .entry(obs.route_id.clone())
            .or_default()
            .entry(cell)
            .or_insert(0) += 1;
    }
    let total: u64 = counts.values().sum();
    let cell_stats: BTreeMap<HexCell, CellStats> = counts
        .iter()
        .map(|(&cell, &count)| {
            let density = count as f64 / cell.area_km2();
            (cell, CellStats { count, density })
        })
        .collect();
    let giant_cells: BTreeSet<HexCell> = counts
        .iter()
        .filter(|(_, &c)| c as f64 > giant_threshold * total as f64)
        .map(|(&cell, _)| cell)
        .collect();

    let mut route_dominant = BTreeMap::new();
    let mut clusters: BTreeMap<HexCell, Vec<String>> = BTreeMap::new();
    for (route, cells) in &route_cell_counts {
        // Plurality cell; ties break on the smaller cell id (BTreeMap order).
        let (&cell, _) = cells.iter().max_by_key(|(cell, &c)| (c, std::cmp::Reverse(**cell))).unwrap();
        route_dominant.insert(route.clone(), cell);
        clusters.entry(cell).or_default().push(route.clone());
    }
    Ok(Stage1Result { obs_cells, cell_stats, giant_cells, route_dominant, clusters })
}

/// Stage 2: topology-aware subdivision of one giant cluster. Returns the
/// member routes partitioned into communities.
pub fn stage2_subdivide(
    members: &[String],
    inputs: &BTreeMap<String, &RouteSimilarityInput>,
    w_spatial: f64,
) -> Vec<Vec<String>> {
    let mut routes: Vec<&String> = members.iter().collect();
    routes.sort();
    let n = routes.len();
    if n <= 1 {
        return vec![members.to_vec()];
    }

    // Route graph: edge iff the routes share at least one stop, weighted by
    // segment Jaccard.
    let stops: Vec<BTreeSet<&str>> = routes.iter().map(|r| inputs[*r].stops()).collect();
    let mut graph = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if stops[i].intersection(&stops[j]).next().is_some() {
                let w = jaccard(&inputs[routes[i]].segments, &inputs[routes[j]].segments);
                if w > 0.0 {
                    graph.add_edge(i, j, w);
                } else {
                    // Shared stop but no shared directed segment still links
                    // the routes; keep a small positive weight so the graph
                    // reflects connectivity.
                    graph.add_edge(i, j, 1e-6);
                }
            }
        }
    }
    let comm = louvain(&graph, 1e-7);
    let n_comm = comm.iter().copied().max().unwrap_or(0) + 1;
    let mut communities: Vec<Vec<String>> = vec![Vec::new(); n_comm];
    for (i, &c) in comm.iter().enumerate() {
        communities[c].push(routes[i].clone());
    }

    // Validate spatial compactness: the community's cell footprint must be
    // edge-connected. Failing communities merge into their most similar
    // neighbor.
    let mut valid: Vec<Vec<String>> = Vec::new();
    let mut failing: Vec<Vec<String>> = Vec::new();
    for c in communities.into_iter().filter(|c| !c.is_empty()) {
        if footprint_connected(&c, inputs) {
            valid.push(c);
        } else {
            failing.push(c);
        }
    }
    for f in failing {
        if valid.is_empty() {
            valid.push(f);
            continue;
        }
        let best = (0..valid.len())
            .max_by(|&a, &b| {
                let sa = mean_similarity(&f, &valid[a], inputs, w_spatial);
                let sb = mean_similarity(&f, &valid[b], inputs, w_spatial);
                sa.partial_cmp(&sb).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        valid[best].extend(f);
        valid[best].sort();
    }
    valid
}

/// BFS over cell adjacency: true when the union footprint of the community is
/// edge-connected (vacuously true for empty footprints).
fn footprint_connected(members: &[String], inputs: &BTreeMap<String, &RouteSimilarityInput>) -> bool {
    let cells: Vec<HexCell> = members
        .iter()
        .flat_map(|r| inputs[r].h3_cells.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if cells.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; cells.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut visited = 1;
    while let Some(i) = stack.pop() {
        for j in 0..cells.len() {
            if !seen[j] && cells[i].is_neighbor(cells[j]) {
                seen[j] = true;
                visited += 1;
                stack.push(j);
            }
        }
    }
    visited == cells.len()
}

fn mean_similarity(
    a: &[String],
    b: &[String],
    inputs: &BTreeMap<String, &RouteSimilarityInput>,
    w_spatial: f64,
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ra in a {
        for rb in b {
            sum += weighted_jaccard(inputs[ra], inputs[rb], w_spatial);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn group_obs(group: &[String], inputs: &BTreeMap<String, &RouteSimilarityInput>) -> u64 {
    group.iter().map(|r| inputs[r].observation_count).sum()
}

/// Stage 3: size rebalancing. Undersized clusters merge into the most similar
/// neighbor that stays within `max_size`; oversized clusters are subdivided by
/// stage 2, falling back to finer-resolution geographic splits, up to 4
/// levels deep. Returns the rebalanced groups plus flags for clusters that
/// could not be brought within bounds.
pub fn stage3_rebalance(
    groups: Vec<Vec<String>>,
    config: &ClusterConfig,
    inputs: &BTreeMap<String, &RouteSimilarityInput>,
    observations: &[ClusterObservation],
) -> Result<(Vec<Vec<String>>, Vec<String>), ClusterError> {
    let total: u64 = inputs.values().map(|i| i.observation_count).sum();
    if total < config.min_size {
        return Err(ClusterError::InfeasibleBounds { total, min_size: config.min_size });
    }
    let mut flags = Vec::new();
    // (members, depth, frozen)
    let mut work: Vec<(Vec<String>, u8, bool)> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|mut g| {
            g.sort();
            (g, 0u8, false)
        })
        .collect();

    let max_steps = 16 * (work.len() + inputs.len()) + 64;
    let mut steps = 0usize;
    loop {
        steps += 1;
        assert!(steps <= max_steps, "rebalancing failed to terminate");
        work.sort_by(|a, b| a.0[0].cmp(&b.0[0]));

        // Oversized first: splitting can create merge targets.
        if let Some(idx) = work
            .iter()
            .position(|(g, _, frozen)| !frozen && group_obs(g, inputs) > config.max_size && g.len() >= 2)
        {
            let (members, depth, _) = work.remove(idx);
            let parts = subdivide_oversized(&members, depth, config, inputs, observations);
            if parts.len() <= 1 {
                let flag = format!("cluster starting at {} stuck oversized at depth {depth}", members[0]);
                flags.push(flag);
                work.push((members, depth, true));
            } else {
                let next_depth = depth + 1;
                let exhausted = next_depth >= 4;
                for mut p in parts {
                    p.sort();
                    if exhausted && group_obs(&p, inputs) > config.max_size {
                        flags.push(format!("cluster starting at {} flagged at max depth", p[0]));
                        work.push((p, next_depth, true));
                    } else {
                        work.push((p, next_depth, false));
                    }
                }
            }
            continue;
        }
        // Single-route oversized clusters cannot be split further.
        for (g, _, frozen) in work.iter_mut() {
            if !*frozen && g.len() == 1 && group_obs(g, inputs) > config.max_size {
                flags.push(format!("single-route cluster {} exceeds max_size", g[0]));
                *frozen = true;
            }
        }

        // Then undersized, smallest first.
        let mut under: Vec<usize> = work
            .iter()
            .enumerate()
            .filter(|(_, (g, _, frozen))| !frozen && group_obs(g, inputs) < config.min_size)
            .map(|(i, _)| i)
            .collect();
        under.sort_by_key(|&i| (group_obs(&work[i].0, inputs), work[i].0[0].clone()));
        let Some(&idx) = under.first() else {
            break;
        };
        let size = group_obs(&work[idx].0, inputs);
        let mut best: Option<(f64, usize)> = None;
        for j in 0..work.len() {
            if j == idx {
                continue;
            }
            if group_obs(&work[j].0, inputs) + size > config.max_size {
                continue;
            }
            let sim = mean_similarity(&work[idx].0, &work[j].0, inputs, config.w_spatial);
            let better = match best {
                None => true,
                Some((s, bj)) => sim > s || (sim == s && work[j].0[0] < work[bj].0[0]),
            };
            if better {
                best = Some((sim, j));
            }
        }
        match best {
            Some((_, j)) => {
                let (members, depth, _) = work.remove(idx);
                let j = if j > idx { j - 1 } else { j };
                work[j].0.extend(members);
                work[j].0.sort();
                work[j].1 = work[j].1.min(depth);
            }
            None => {
                flags.push(format!("cluster starting at {} stuck undersized (no feasible merge)", work[idx].0[0]));
                work[idx].2 = true;
            }
        }
    }

    let mut out: Vec<Vec<String>> = work.into_iter().map(|(g, _, _)| g).collect();
    out.sort_by(|a, b| a[0].cmp(&b[0]));
    Ok((out, flags))
}

/// Topological split first; single-community results fall back to a
/// geographic split at one finer resolution per depth level.
fn subdivide_oversized(
    members: &[String],
    depth: u8,
    config: &ClusterConfig,
    inputs: &BTreeMap<String, &RouteSimilarityInput>,
    observations: &[ClusterObservation],
) -> Vec<Vec<String>> {
    let parts = stage2_subdivide(members, inputs, config.w_spatial);
    if parts.len() > 1 {
        return parts;
    }
    let finer = (config.h3_resolution + 1 + depth).min(15);
    let member_set: BTreeSet<&String> = members.iter().collect();
    let subset: Vec<ClusterObservation> = observations
        .iter()
        .filter(|o| member_set.contains(&o.route_id))
        .cloned()
        .collect();
    if subset.is_empty() {
        return vec![members.to_vec()];
    }
    match stage1_geographic(&subset, finer, config.giant_threshold) {
        Ok(s1) => {
            let groups: Vec<Vec<String>> = s1.clusters.into_values().collect();
            if groups.len() > 1 {
                groups
            } else {
                vec![members.to_vec()]
            }
        }
        Err(_) => vec![members.to_vec()],
    }
}

/// Assembles a `ClusterAssignment` (contiguous ids ordered by each cluster's
/// smallest route id) with metrics over the given similarity inputs.
fn assemble(
    groups: Vec<Vec<String>>,
    inputs: &[RouteSimilarityInput],
    w_spatial: f64,
    flags: Vec<String>,
) -> Result<ClusterAssignment, ClusterError> {
    let index: BTreeMap<&str, usize> = inputs.iter().enumerate().map(|(i, r)| (r.route_id.as_str(), i)).collect();
    let mut groups = groups;
    let mut flags = flags;
    for g in groups.iter_mut() {
        g.retain(|r| index.contains_key(r.as_str()));
    }
    // Routes with similarity inputs but no group become singletons so the
    // assignment stays total.
    let grouped: BTreeSet<String> = groups.iter().flatten().cloned().collect();
    for r in inputs {
        if !grouped.contains(&r.route_id) {
            flags.push(format!("route {} had no observations; assigned a singleton cluster", r.route_id));
            groups.push(vec![r.route_id.clone()]);
        }
    }
    groups.retain(|g| !g.is_empty());
    groups.sort_by(|a, b| a[0].cmp(&b[0]));
    let idx_groups: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| g.iter().map(|r| index[r.as_str()]).collect())
        .collect();
    let dist = distance_matrix(inputs, w_spatial)?;
    let metrics = cluster_metrics(&idx_groups, &dist, inputs);
    let mut assignment = BTreeMap::new();
    let mut route_counts = Vec::with_capacity(groups.len());
    let mut observation_counts = Vec::with_capacity(groups.len());
    for (cid, g) in groups.iter().enumerate() {
        route_counts.push(g.len());
        observation_counts.push(g.iter().map(|r| inputs[index[r.as_str()]].observation_count).sum());
        for r in g {
            assignment.insert(r.clone(), cid);
        }
    }
    Ok(ClusterAssignment { assignment, route_counts, observation_counts, metrics, flags })
}

/// The literal three-stage pipeline: stage-1 geographic seeding, stage-2
/// subdivision of giant clusters, stage-3 rebalancing.
pub fn three_stage_cluster(
    observations: &[ClusterObservation],
    inputs: &[RouteSimilarityInput],
    config: &ClusterConfig,
) -> Result<ClusterAssignment, ClusterError> {
    config.validate()?;
    let by_id: BTreeMap<String, &RouteSimilarityInput> =
        inputs.iter().map(|r| (r.route_id.clone(), r)).collect();
    let s1 = stage1_geographic(observations, config.h3_resolution, config.giant_threshold)?;
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (cell, members) in &s1.clusters {
        if s1.giant_cells.contains(cell) && members.len() >= 2 {
            groups.extend(stage2_subdivide(members, &by_id, config.w_spatial));
        } else {
            groups.push(members.clone());
        }
    }
    let (balanced, flags) = stage3_rebalance(groups, config, &by_id, observations)?;
    assemble(balanced, inputs, config.w_spatial, flags)
}

/// Agglomerative seeding followed by stages 2–3: Ward/complete/average on
/// `1 − weighted_jaccard`, giant clusters split topologically, sizes
/// rebalanced.
pub fn hybrid_cluster(
    inputs: &[RouteSimilarityInput],
    observations: &[ClusterObservation],
    config: &ClusterConfig,
) -> Result<ClusterAssignment, ClusterError> {
    config.validate()?;
    if inputs.len() < 2 {
        return Err(ClusterError::TooFewRoutes(inputs.len()));
    }
    let by_id: BTreeMap<String, &RouteSimilarityInput> =
        inputs.iter().map(|r| (r.route_id.clone(), r)).collect();
    let dist = distance_matrix(inputs, config.w_spatial)?;
    let merges = linkage::linkage_merges(&dist, config.linkage);
    let labels = match config.distance_threshold {
        Some(h) => linkage::cut_by_height(&merges, inputs.len(), h)?,
        None => linkage::cut_merges(&merges, inputs.len(), config.n_clusters.min(inputs.len()))?,
    };
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut groups: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(inputs[i].route_id.clone());
    }

    let total: u64 = inputs.iter().map(|r| r.observation_count).sum();
    let mut expanded: Vec<Vec<String>> = Vec::new();
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        let obs = g.iter().map(|r| by_id[r].observation_count).sum::<u64>();
        if obs as f64 > config.giant_threshold * total as f64 && g.len() >= 2 {
            expanded.extend(stage2_subdivide(&g, &by_id, config.w_spatial));
        } else {
            expanded.push(g);
        }
    }
    let (balanced, flags) = stage3_rebalance(expanded, config, &by_id, observations)?;
    assemble(balanced, inputs, config.w_spatial, flags)
}
