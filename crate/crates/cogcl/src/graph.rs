//! Bipartite interaction graph in CSR form, plus code-based virtual-neighbor
//! augmentation.
//!
//! Node index space is fixed per graph: users first, then items, then user
//! code nodes (level-major), then item code nodes. Augmented graphs always
//! carry the full code node set; codes never sampled in an epoch are simply
//! isolated (degree 0).

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::quantizer::CodeAssignment;

/// What a node index stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    User,
    Item,
    UserCode,
    ItemCode,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::User => "user",
            NodeKind::Item => "item",
            NodeKind::UserCode => "user_code",
            NodeKind::ItemCode => "item_code",
        }
    }
}

/// The two stochastic augmentation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentOp {
    Replace,
    Add,
}

impl AugmentOp {
    pub fn name(self) -> &'static str {
        match self {
            AugmentOp::Replace => "replace",
            AugmentOp::Add => "add",
        }
    }
}

/// Symmetric-normalized sparse graph over users, items and (optionally)
/// code nodes.
///
/// Every edge (a, b) is stored in both directions with weight
/// `1/sqrt(deg(a) * deg(b))`, degrees taken in this graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub num_users: usize,
    pub num_items: usize,
    pub num_user_codes: usize,
    pub num_item_codes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl BipartiteGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items + self.num_user_codes + self.num_item_codes
    }

    /// Directed nonzero count (twice the undirected edge count).
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn node_kind(&self, node: usize) -> NodeKind {
        if node < self.num_users {
            NodeKind::User
        } else if node < self.num_users + self.num_items {
            NodeKind::Item
        } else if node < self.num_users + self.num_items + self.num_user_codes {
            NodeKind::UserCode
        } else {
            NodeKind::ItemCode
        }
    }

    pub fn user_node(&self, u: u32) -> usize {
        u as usize
    }

    pub fn item_node(&self, i: u32) -> usize {
        self.num_users + i as usize
    }

    pub fn degree(&self, node: usize) -> usize {
        self.row_ptr[node + 1] - self.row_ptr[node]
    }

    /// Neighbor indices and edge weights of one node.
    pub fn row(&self, node: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[node];
        let hi = self.row_ptr[node + 1];
        (&self.col_idx[lo..hi], &self.weights[lo..hi])
    }

    /// Build from an undirected edge list (node-id pairs, no duplicates).
    fn from_undirected_edges(
        num_users: usize,
        num_items: usize,
        num_user_codes: usize,
        num_item_codes: usize,
        edges: &[(u32, u32)],
    ) -> Self {
        let n = num_users + num_items + num_user_codes + num_item_codes;
        let mut degree = vec![0usize; n];
        for &(a, b) in edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for v in 0..n {
            row_ptr[v + 1] = row_ptr[v] + degree[v];
        }
        let mut col_idx = vec![0u32; row_ptr[n]];
        let mut fill = row_ptr.clone();
        for &(a, b) in edges {
            col_idx[fill[a as usize]] = b;
            fill[a as usize] += 1;
            col_idx[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        // Sort neighbors within each row for deterministic layout.
        for v in 0..n {
            col_idx[row_ptr[v]..row_ptr[v + 1]].sort_unstable();
        }
        let mut weights = vec![0f64; col_idx.len()];
        for v in 0..n {
            for e in row_ptr[v]..row_ptr[v + 1] {
                let u = col_idx[e] as usize;
                weights[e] = 1.0 / ((degree[v] as f64) * (degree[u] as f64)).sqrt();
            }
        }
        BipartiteGraph {
            num_users,
            num_items,
            num_user_codes,
            num_item_codes,
            row_ptr,
            col_idx,
            weights,
        }
    }

    /// Dump as an undirected edge-list TSV: `src dst weight kinds`.
    pub fn dump_edge_list(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        for a in 0..self.num_nodes() {
            let (cols, ws) = self.row(a);
            for (&b, &w) in cols.iter().zip(ws) {
                if (b as usize) < a {
                    continue;
                }
                writeln!(
                    out,
                    "{}\t{}\t{:.12}\t{}-{}",
                    a,
                    b,
                    w,
                    self.node_kind(a).name(),
                    self.node_kind(b as usize).name()
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
        Ok(())
    }
}

/// Probabilities for the replace/add operators and the sampling seed.
#[derive(Debug, Clone, Copy)]
pub struct AugmentationConfig {
    pub p_replace: f64,
    pub p_add: f64,
    pub seed: u64,
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_replace", self.p_replace), ("p_add", self.p_add)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be in [0,1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Two independently augmented graphs sharing one node index space.
#[derive(Debug, Clone)]
pub struct AugmentedGraphPair {
    pub graph1: Arc<BipartiteGraph>,
    pub graph2: Arc<BipartiteGraph>,
    pub operators: (AugmentOp, AugmentOp),
    pub epoch: u64,
}

/// Raw output of one round of virtual-neighbor augmentation, before
/// normalization. Exposed so the per-node edge-count identities can be
/// checked directly.
#[derive(Debug, Clone)]
pub struct AugmentedEdges {
    /// Surviving original interactions.
    pub interactions: Vec<(u32, u32)>,
    /// (user, item-code node) edges from the user-side pass, deduped.
    pub user_to_item_code: Vec<(u32, u32)>,
    /// (user-code node, item) edges from the item-side pass, deduped.
    pub user_code_to_item: Vec<(u32, u32)>,
    /// Per-user sampled neighbor subset N_u^aug.
    pub user_sampled: Vec<Vec<u32>>,
    /// Per-item sampled neighbor subset N_i^aug.
    pub item_sampled: Vec<Vec<u32>>,
}

/// Node id of an item-code node for (level, code).
fn item_code_node(num_users: usize, num_items: usize, h: usize, k: u32, codes_per_level: usize, num_levels: usize) -> u32 {
    (num_users + num_items + num_levels * codes_per_level + h * codes_per_level + k as usize) as u32
}

/// Node id of a user-code node for (level, code).
fn user_code_node(num_users: usize, num_items: usize, h: usize, k: u32, codes_per_level: usize) -> u32 {
    (num_users + num_items + h * codes_per_level + k as usize) as u32
}

/// Base interaction graph over users and items (no code nodes).
pub fn build_base_graph(ds: &InteractionDataset) -> BipartiteGraph {
    let edges: Vec<(u32, u32)> = ds
        .train
        .iter()
        .map(|&(u, i)| (u, (ds.num_users + i as usize) as u32))
        .collect();
    BipartiteGraph::from_undirected_edges(ds.num_users, ds.num_items, 0, 0, &edges)
}

/// One round of virtual-neighbor augmentation.
///
/// Each side samples its neighbors elementwise with the operator's
/// probability and expands sampled interactions into `H` code edges. Under
/// `Replace` an original (u, i) edge is dropped when either side sampled it;
/// under `Add` all original edges survive.
pub fn build_augmented_edges(
    ds: &InteractionDataset,
    codes: &CodeAssignment,
    p: f64,
    operator: AugmentOp,
    round_seed: u64,
) -> AugmentedEdges {
    let user_items = ds.user_items(crate::data::Split::Train);
    let item_users = ds.item_users(crate::data::Split::Train);
    let h_levels = codes.num_levels;
    let k_per = codes.codes_per_level;

    let mut rng = ChaCha8Rng::seed_from_u64(round_seed);

    // User-side pass: sample items, emit (user, item-code) edges.
    let mut user_sampled: Vec<Vec<u32>> = Vec::with_capacity(ds.num_users);
    let mut user_to_item_code: Vec<(u32, u32)> = Vec::new();
    for (u, items) in user_items.iter().enumerate() {
        let mut sampled = Vec::new();
        for &i in items {
            if rng.random::<f64>() < p {
                sampled.push(i);
            }
        }
        for &i in &sampled {
            for h in 0..h_levels {
                let code = codes.item_codes[(i as usize, h)];
                user_to_item_code.push((
                    u as u32,
                    item_code_node(ds.num_users, ds.num_items, h, code, k_per, h_levels),
                ));
            }
        }
        user_sampled.push(sampled);
    }

    // Item-side pass: sample users, emit (user-code, item) edges.
    let mut item_sampled: Vec<Vec<u32>> = Vec::with_capacity(ds.num_items);
    let mut user_code_to_item: Vec<(u32, u32)> = Vec::new();
    for (i, users) in item_users.iter().enumerate() {
        let mut sampled = Vec::new();
        for &u in users {
            if rng.random::<f64>() < p {
                sampled.push(u);
            }
        }
        for &u in &sampled {
            for h in 0..h_levels {
                let code = codes.user_codes[(u as usize, h)];
                user_code_to_item.push((
                    user_code_node(ds.num_users, ds.num_items, h, code, k_per),
                    (ds.num_users + i) as u32,
                ));
            }
        }
        item_sampled.push(sampled);
    }

    user_to_item_code.sort_unstable();
    user_to_item_code.dedup();
    user_code_to_item.sort_unstable();
    user_code_to_item.dedup();

    // Original interactions survive unless replaced by either side.
    let interactions: Vec<(u32, u32)> = match operator {
        AugmentOp::Add => ds.train.clone(),
        AugmentOp::Replace => {
            let mut removed: std::collections::HashSet<(u32, u32)> = std::collections::HashSet::new();
            for (u, sampled) in user_sampled.iter().enumerate() {
                for &i in sampled {
                    removed.insert((u as u32, i));
                }
            }
            for (i, sampled) in item_sampled.iter().enumerate() {
                for &u in sampled {
                    removed.insert((u, i as u32));
                }
            }
            ds.train
                .iter()
                .copied()
                .filter(|p| !removed.contains(p))
                .collect()
        }
    };

    AugmentedEdges {
        interactions,
        user_to_item_code,
        user_code_to_item,
        user_sampled,
        item_sampled,
    }
}

/// Normalize one round of augmented edges into a full graph with code nodes.
pub fn edges_to_graph(ds: &InteractionDataset, codes: &CodeAssignment, edges: &AugmentedEdges) -> BipartiteGraph {
    let code_count = codes.num_levels * codes.codes_per_level;
    let mut all: Vec<(u32, u32)> =
        Vec::with_capacity(edges.interactions.len() + edges.user_to_item_code.len() + edges.user_code_to_item.len());
    for &(u, i) in &edges.interactions {
        all.push((u, (ds.num_users + i as usize) as u32));
    }
    all.extend_from_slice(&edges.user_to_item_code);
    all.extend_from_slice(&edges.user_code_to_item);
    BipartiteGraph::from_undirected_edges(ds.num_users, ds.num_items, code_count, code_count, &all)
}

/// Draw two operators and build the epoch's pair of augmented graphs.
/// Deterministic for a fixed (config seed, epoch).
pub fn build_augmented_pair(
    ds: &InteractionDataset,
    codes: &CodeAssignment,
    cfg: &AugmentationConfig,
    epoch: u64,
) -> Result<AugmentedGraphPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let one_round = |rng: &mut ChaCha8Rng| {
        let op = if rng.random::<f64>() < 0.5 {
            AugmentOp::Replace
        } else {
            AugmentOp::Add
        };
        let p = match op {
            AugmentOp::Replace => cfg.p_replace,
            AugmentOp::Add => cfg.p_add,
        };
        let round_seed = rng.random::<u64>();
        let edges = build_augmented_edges(ds, codes, p, op, round_seed);
        (op, edges_to_graph(ds, codes, &edges))
    };
    let (o1, g1) = one_round(&mut rng);
    let (o2, g2) = one_round(&mut rng);
    Ok(AugmentedGraphPair {
        graph1: Arc::new(g1),
        graph2: Arc::new(g2),
        operators: (o1, o2),
        epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::InteractionDataset;
    use ndarray::Array2;

    fn ds(num_users: usize, num_items: usize, train: &[(u32, u32)]) -> InteractionDataset {
        InteractionDataset::from_index_pairs(num_users, num_items, train.to_vec(), vec![], vec![])
            .unwrap()
    }

    /// Distinct codes per (entity, level): code of entity e at level h is
    /// (e + h) mod K, injective per level when K >= n.
    fn distinct_codes(num_users: usize, num_items: usize, h: usize, k: usize) -> CodeAssignment {
        CodeAssignment {
            user_codes: Array2::from_shape_fn((num_users, h), |(e, lvl)| ((e + lvl) % k) as u32),
            item_codes: Array2::from_shape_fn((num_items, h), |(e, lvl)| ((e + 2 * lvl) % k) as u32),
            num_levels: h,
            codes_per_level: k,
            epoch: 0,
        }
    }

    #[test]
    fn single_edge_has_unit_weight_both_directions() {
        let g = build_base_graph(&ds(1, 1, &[(0, 0)]));
        let (cols, ws) = g.row(0);
        assert_eq!(cols, &[1]);
        assert_eq!(ws, &[1.0]);
        let (cols, ws) = g.row(1);
        assert_eq!(cols, &[0]);
        assert_eq!(ws, &[1.0]);
    }

    #[test]
    fn star_edges_weighted_by_degree_product() {
        let g = build_base_graph(&ds(1, 2, &[(0, 0), (0, 1)]));
        let (_, ws) = g.row(0);
        let expect = 1.0 / 2f64.sqrt();
        assert!((ws[0] - expect).abs() < 1e-12);
        assert!((ws[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn complete_bipartite_three_by_three_all_one_third() {
        let pairs: Vec<(u32, u32)> = (0..3).flat_map(|u| (0..3).map(move |i| (u, i))).collect();
        let g = build_base_graph(&ds(3, 3, &pairs));
        for node in 0..6 {
            let (_, ws) = g.row(node);
            assert_eq!(ws.len(), 3);
            for &w in ws {
                assert!((w - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csr_is_symmetric_and_normalized() {
        let pairs: Vec<(u32, u32)> = vec![(0, 0), (0, 1), (1, 1), (2, 0), (2, 2), (3, 3)];
        let g = build_base_graph(&ds(4, 4, &pairs));
        for a in 0..g.num_nodes() {
            let (cols, ws) = g.row(a);
            for (&b, &w) in cols.iter().zip(ws) {
                let (bc, bw) = g.row(b as usize);
                let pos = bc.iter().position(|&c| c as usize == a).expect("transpose edge");
                assert_eq!(bw[pos], w);
                let expect = 1.0 / ((g.degree(a) * g.degree(b as usize)) as f64).sqrt();
                assert!((w - expect).abs() < 1e-12);
                assert_ne!(a, b as usize, "no self loops");
            }
        }
    }

    #[test]
    fn augment_p_zero_reproduces_base_graph_under_both_operators() {
        let pairs: Vec<(u32, u32)> = vec![(0, 0), (0, 1), (1, 1), (2, 2), (1, 0)];
        let d = ds(3, 3, &pairs);
        let codes = distinct_codes(3, 3, 2, 8);
        let base = build_base_graph(&d);
        for op in [AugmentOp::Replace, AugmentOp::Add] {
            let edges = build_augmented_edges(&d, &codes, 0.0, op, 99);
            assert_eq!(edges.interactions, d.train);
            assert!(edges.user_to_item_code.is_empty());
            assert!(edges.user_code_to_item.is_empty());
            let g = edges_to_graph(&d, &codes, &edges);
            // User/item rows coincide with the base graph; code nodes isolated.
            for node in 0..base.num_nodes() {
                assert_eq!(g.row(node), base.row(node));
            }
            for node in base.num_nodes()..g.num_nodes() {
                assert_eq!(g.degree(node), 0);
            }
        }
    }

    #[test]
    fn replace_with_full_sampling_keeps_only_code_edges() {
        // One user, two items, H=2, all neighbors sampled.
        let d = ds(1, 2, &[(0, 0), (0, 1)]);
        let codes = distinct_codes(1, 2, 2, 8);
        let edges = build_augmented_edges(&d, &codes, 1.0, AugmentOp::Replace, 1);
        assert!(edges.interactions.is_empty());
        // Eq. 9 with N_u^aug = N_u: H * |N_u| distinct code edges.
        assert_eq!(edges.user_to_item_code.len(), 4);
        let g = edges_to_graph(&d, &codes, &edges);
        assert_eq!(g.degree(0), 4);
    }

    #[test]
    fn add_with_full_sampling_degree_counts() {
        // H=4, one user with 10 neighbors, everything sampled, add:
        // degree = 10 + 10 * 4 = 50 when codes are collision-free.
        let pairs: Vec<(u32, u32)> = (0..10).map(|i| (0, i)).collect();
        let d = ds(1, 10, &pairs);
        let codes = distinct_codes(1, 10, 4, 16);
        let edges = build_augmented_edges(&d, &codes, 1.0, AugmentOp::Add, 2);
        assert_eq!(edges.interactions.len(), 10);
        assert_eq!(edges.user_to_item_code.len(), 40);
        let g = edges_to_graph(&d, &codes, &edges);
        assert_eq!(g.degree(0), 50);
    }

    #[test]
    fn code_edges_back_map_to_observed_interactions() {
        let pairs: Vec<(u32, u32)> = vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2)];
        let d = ds(3, 3, &pairs);
        let codes = distinct_codes(3, 3, 3, 4);
        let train: std::collections::HashSet<(u32, u32)> = d.train.iter().copied().collect();
        for op in [AugmentOp::Replace, AugmentOp::Add] {
            let edges = build_augmented_edges(&d, &codes, 0.7, op, 5);
            for &(u, code_node) in &edges.user_to_item_code {
                // Recover (level, code) and demand an observed (u, i) carrying it.
                let off = code_node as usize - d.num_users - d.num_items - 3 * 4;
                let (h, k) = (off / 4, (off % 4) as u32);
                let ok = (0..d.num_items as u32)
                    .any(|i| train.contains(&(u, i)) && codes.item_codes[(i as usize, h)] == k);
                assert!(ok, "code edge without observed interaction");
            }
            for &(code_node, item_node) in &edges.user_code_to_item {
                let i = item_node - d.num_users as u32;
                let off = code_node as usize - d.num_users - d.num_items;
                let (h, k) = (off / 4, (off % 4) as u32);
                let ok = (0..d.num_users as u32)
                    .any(|u| train.contains(&(u, i)) && codes.user_codes[(u as usize, h)] == k);
                assert!(ok, "code edge without observed interaction");
            }
        }
    }

    #[test]
    fn pair_is_deterministic_for_seed_and_epoch() {
        let pairs: Vec<(u32, u32)> = (0..8).flat_map(|u| (0..4).map(move |i| (u, (u + i) % 6))).collect();
        let d = ds(8, 6, &pairs);
        let codes = distinct_codes(8, 6, 2, 8);
        let cfg = AugmentationConfig { p_replace: 0.5, p_add: 0.4, seed: 33 };
        let a = build_augmented_pair(&d, &codes, &cfg, 3).unwrap();
        let b = build_augmented_pair(&d, &codes, &cfg, 3).unwrap();
        assert_eq!(a.operators, b.operators);
        assert_eq!(*a.graph1, *b.graph1);
        assert_eq!(*a.graph2, *b.graph2);
        let c = build_augmented_pair(&d, &codes, &cfg, 4).unwrap();
        assert!(*a.graph1 != *c.graph1 || a.operators != c.operators || *a.graph2 != *c.graph2);
    }

    #[test]
    fn operator_draw_hits_both_over_epochs() {
        let d = ds(2, 2, &[(0, 0), (1, 1), (0, 1)]);
        let codes = distinct_codes(2, 2, 2, 4);
        let cfg = AugmentationConfig { p_replace: 0.5, p_add: 0.5, seed: 1 };
        let mut seen = std::collections::HashSet::new();
        for epoch in 0..32 {
            let pair = build_augmented_pair(&d, &codes, &cfg, epoch).unwrap();
            seen.insert(pair.operators.0);
            seen.insert(pair.operators.1);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn edge_count_identities_per_node() {
        // Collision-free codes make Eq. 9/10 counts exact per entity.
        let pairs: Vec<(u32, u32)> = (0..12)
            .flat_map(|u| (0..5).map(move |i| (u, (u * 2 + i) % 15)))
            .collect();
        let d = ds(12, 15, &pairs);
        let h = 3;
        let k = 16;
        let codes = distinct_codes(12, 15, h, k);
        let user_items = d.user_items(crate::data::Split::Train);
        for (op, p) in [(AugmentOp::Replace, 0.6), (AugmentOp::Add, 0.6)] {
            let edges = build_augmented_edges(&d, &codes, p, op, 7);
            for u in 0..d.num_users {
                let n_u = user_items[u].len();
                let aug = edges.user_sampled[u].len();
                let kept = edges.interactions.iter().filter(|&&(uu, _)| uu as usize == u).count();
                let code_edges = edges
                    .user_to_item_code
                    .iter()
                    .filter(|&&(uu, _)| uu as usize == u)
                    .count();
                assert_eq!(code_edges, h * aug);
                match op {
                    // User-pass removals only; the item pass may remove more.
                    AugmentOp::Replace => assert!(kept <= n_u - aug),
                    AugmentOp::Add => assert_eq!(kept, n_u),
                }
            }
        }
    }

    #[test]
    fn dump_edge_list_format() {
        let d = ds(2, 2, &[(0, 0), (1, 1)]);
        let g = build_base_graph(&d);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        g.dump_edge_list(tmp.path()).unwrap();
        let text = std::fs::read_to_string(tmp.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("0\t2\t"));
        assert!(lines[0].ends_with("user-item"));
    }
}
