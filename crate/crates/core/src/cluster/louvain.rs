//! Greedy modularity maximization (Louvain-style): repeated local moves over
//! a fixed node order followed by graph coarsening, until the modularity gain
//! of a full level drops below the configured threshold.
//!
//! Entirely deterministic: nodes are swept in ascending order and ties prefer
//! the smallest community id.

/// Undirected weighted graph. Self-loops are stored once and count twice in
/// node strength, matching the usual modularity convention.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self { n, adj: vec![Vec::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) {
        assert!(u < self.n && v < self.n);
        if u == v {
            self.adj[u].push((u, w));
        } else {
            self.adj[u].push((v, w));
            self.adj[v].push((u, w));
        }
    }

    pub fn has_edges(&self) -> bool {
        self.adj.iter().any(|a| !a.is_empty())
    }

    fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(j, w)| if j == i { 2.0 * w } else { w }).sum()
    }

    fn two_m(&self) -> f64 {
        (0..self.n).map(|i| self.strength(i)).sum()
    }
}

/// Modularity of a partition.
pub fn modularity(g: &Graph, comm: &[usize]) -> f64 {
    assert_eq!(comm.len(), g.n);
    let two_m = g.two_m();
    if two_m == 0.0 {
        return 0.0;
    }
    let n_comm = comm.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; n_comm]; // Σ_in: ordered-pair internal weight
    let mut total = vec![0.0; n_comm]; // Σ_tot: strength per community
    for i in 0..g.n {
        total[comm[i]] += g.strength(i);
        for &(j, w) in &g.adj[i] {
            if comm[i] == comm[j] {
                // Each i≠j edge is visited from both endpoints; self-loops
                // once but count twice.
                internal[comm[i]] += if i == j { 2.0 * w } else { w };
            }
        }
    }
    (0..n_comm)
        .map(|c| internal[c] / two_m - (total[c] / two_m).powi(2))
        .sum()
}

/// Community labels (contiguous from 0, ordered by smallest member) found by
/// greedy modularity maximization. `min_gain` stops the level loop.
pub fn louvain(g: &Graph, min_gain: f64) -> Vec<usize> {
    let mut mapping: Vec<usize> = (0..g.n).collect();
    let mut current = g.clone();
    let mut q_prev = modularity(&current, &(0..current.n).collect::<Vec<_>>());
    loop {
        if current.two_m() == 0.0 {
            break; // edgeless: all singletons
        }
        let comm = local_moves(&current);
        let q_now = modularity(&current, &comm);
        let n_comm = comm.iter().copied().max().map_or(0, |m| m + 1);
        if q_now - q_prev < min_gain || n_comm == current.n {
            break;
        }
        q_prev = q_now;
        for label in mapping.iter_mut() {
            *label = comm[*label];
        }
        current = coarsen(&current, &comm, n_comm);
    }
    relabel(&mapping)
}

/// One level of local moves over a fixed sweep order.
fn local_moves(g: &Graph) -> Vec<usize> {
    let n = g.n;
    let two_m = g.two_m();
    let strengths: Vec<f64> = (0..n).map(|i| g.strength(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut comm_total = strengths.clone();

    loop {
        let mut moved = false;
        for i in 0..n {
            let current = comm[i];
            // Edge weight from i to each neighboring community (self-loops
            // excluded: they move with the node).
            let mut to_comm: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            to_comm.insert(current, 0.0);
            for &(j, w) in &g.adj[i] {
                if j != i {
                    *to_comm.entry(comm[j]).or_insert(0.0) += w;
                }
            }
            comm_total[current] -= strengths[i];
            // gain(C) ∝ w_i→C − Σ_tot(C)·k_i/(2m), evaluated with i removed.
            // Staying put is the baseline; a move needs a strict improvement,
            // and the ascending sweep keeps the smallest community id on ties.
            let gain_of = |c: usize, w_ic: f64| w_ic - comm_total[c] * strengths[i] / two_m;
            let mut best_comm = current;
            let mut best_gain = gain_of(current, to_comm[&current]);
            for (&c, &w_ic) in &to_comm {
                if c == current {
                    continue;
                }
                let gain = gain_of(c, w_ic);
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best_comm = c;
                }
            }
            comm_total[best_comm] += strengths[i];
            if best_comm != current {
                comm[i] = best_comm;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    relabel(&comm)
}

/// Contracts communities into supernodes, keeping internal weight as
/// self-loops.
fn coarsen(g: &Graph, comm: &[usize], n_comm: usize) -> Graph {
    let mut acc: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for i in 0..g.n {
        for &(j, w) in &g.adj[i] {
            // Visit each undirected edge once.
            if j < i {
                continue;
            }
            let (cu, cv) = (comm[i].min(comm[j]), comm[i].max(comm[j]));
            *acc.entry((cu, cv)).or_insert(0.0) += w;
        }
    }
    let mut out = Graph::new(n_comm);
    for ((u, v), w) in acc {
        out.add_edge(u, v, w);
    }
    out
}

/// Remaps labels to 0..k−1, ordered by each label's smallest member index.
fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut first_seen: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    for &l in labels {
        if !first_seen.contains_key(&l) {
            first_seen.insert(l, order.len());
            order.push(l);
        }
    }
    labels.iter().map(|l| first_seen[l]).collect()
}
