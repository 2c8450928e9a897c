//! LightGCN-style propagation with per-layer input dropout.
//!
//! One layer is `Z^l = A_hat * dropout(Z^{l-1})`; the readout averages
//! layers 1..L, skipping the layer-0 embeddings. Augmented views run the
//! same encoder over the augmented graphs with the ID and code embeddings
//! concatenated as input.

use std::sync::Arc;

use crate::compute::{mix_seed, spmm_dense, Matrix, NodeId, ParameterStore, Scalar, Tape};
use crate::error::{Error, Result};
use crate::graph::{AugmentedGraphPair, BipartiteGraph};

/// Store key of the ID embedding matrix (users then items).
pub const PARAM_ID_EMBED: &str = "z0";
/// Store key of the code embedding matrix (user codes then item codes).
pub const PARAM_CODE_EMBED: &str = "zc";

#[derive(Debug, Clone, Copy)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub embed_dim: usize,
    pub dropout_rate: f64,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidInput(
                "encoder needs at least 1 layer and 1 dimension".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput(format!(
                "dropout rate must be in [0,1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Tape node handles for the three contrastive views of one forward pass.
///
/// `base` covers user+item rows of the interaction graph; `aug1`/`aug2`
/// cover user+item+code rows of the two augmented graphs.
#[derive(Debug, Clone, Copy)]
pub struct ViewRepresentations {
    pub base: NodeId,
    pub aug1: Option<NodeId>,
    pub aug2: Option<NodeId>,
}

impl ViewRepresentations {
    pub fn aug1(&self) -> NodeId {
        self.aug1.expect("augmented views were not encoded")
    }
    pub fn aug2(&self) -> NodeId {
        self.aug2.expect("augmented views were not encoded")
    }
}

/// Multi-layer propagation of `x0` over `graph`, recorded on the tape.
/// Fresh dropout masks are drawn per call from `seed`.
pub fn encode<S: Scalar>(
    tape: &mut Tape<S>,
    graph: &Arc<BipartiteGraph>,
    x0: NodeId,
    cfg: &EncoderConfig,
    seed: u64,
    train: bool,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut layers = Vec::with_capacity(cfg.num_layers);
    let mut x = x0;
    for layer in 0..cfg.num_layers {
        let dropped = tape.dropout(x, cfg.dropout_rate, mix_seed(seed, layer as u64), train)?;
        x = tape.spmm(graph, dropped)?;
        layers.push(x);
    }
    tape.mean_of(&layers)
}

/// Encode the base view from `Z0` and, when an augmented pair is given, the
/// two augmented views from `[Z0; Zc]`, with independent dropout seeds.
pub fn encode_all_views<S: Scalar>(
    tape: &mut Tape<S>,
    base_graph: &Arc<BipartiteGraph>,
    pair: Option<&AugmentedGraphPair>,
    store: &ParameterStore<S>,
    cfg: &EncoderConfig,
    seed: u64,
    train: bool,
) -> Result<ViewRepresentations> {
    let z0 = tape.param(store, PARAM_ID_EMBED);
    let base = encode(tape, base_graph, z0, cfg, mix_seed(seed, 0xb5), train)?;
    let (aug1, aug2) = match pair {
        Some(pair) => {
            let zc = tape.param(store, PARAM_CODE_EMBED);
            let x0 = tape.concat_rows(z0, zc)?;
            let a1 = encode(tape, &pair.graph1, x0, cfg, mix_seed(seed, 0xa1), train)?;
            let a2 = encode(tape, &pair.graph2, x0, cfg, mix_seed(seed, 0xa2), train)?;
            (Some(a1), Some(a2))
        }
        None => (None, None),
    };
    Ok(ViewRepresentations { base, aug1, aug2 })
}

/// Dropout-free propagation without tape recording; used for code refresh
/// and evaluation.
pub fn encode_eval<S: Scalar>(
    graph: &BipartiteGraph,
    x0: &Matrix<S>,
    num_layers: usize,
) -> Result<Matrix<S>> {
    let mut acc = Matrix::<S>::zeros(x0.raw_dim());
    let mut x = x0.clone();
    for _ in 0..num_layers {
        x = spmm_dense(graph, &x)?;
        acc += &x;
    }
    let scale = S::from_f64(1.0 / num_layers as f64);
    acc.mapv_inplace(|v| v * scale);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::{grad_check, random_normal_matrix, ParameterStore};
    use crate::data::InteractionDataset;
    use crate::graph::{build_augmented_pair, build_base_graph, AugmentationConfig};
    use crate::quantizer::CodeAssignment;
    use ndarray::{array, Array2};

    fn graph_of(num_users: usize, num_items: usize, pairs: &[(u32, u32)]) -> Arc<BipartiteGraph> {
        let ds = InteractionDataset::from_index_pairs(
            num_users,
            num_items,
            pairs.to_vec(),
            vec![],
            vec![],
        )
        .unwrap();
        Arc::new(build_base_graph(&ds))
    }

    fn cfg(layers: usize, d: usize, dropout: f64) -> EncoderConfig {
        EncoderConfig { num_layers: layers, embed_dim: d, dropout_rate: dropout }
    }

    #[test]
    fn one_layer_no_dropout_is_single_propagation() {
        let g = graph_of(1, 1, &[(0, 0)]);
        let mut tape = Tape::<f64>::new();
        let x0 = tape.constant(array![[1.0, 0.0], [0.0, 1.0]]);
        let out = encode(&mut tape, &g, x0, &cfg(1, 2, 0.0), 1, false).unwrap();
        assert_eq!(*tape.value(out), array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn empty_graph_yields_zeros_because_layer_zero_is_skipped() {
        let g = graph_of(2, 2, &[]);
        let mut tape = Tape::<f64>::new();
        let x0 = tape.constant(random_normal_matrix(4, 3, 1.0, 2));
        let out = encode(&mut tape, &g, x0, &cfg(3, 3, 0.0), 1, false).unwrap();
        assert!(tape.value(out).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_layers_match_dense_mean_oracle() {
        let g = graph_of(1, 2, &[(0, 0), (0, 1)]);
        let n = g.num_nodes();
        let mut a_hat = Array2::<f64>::zeros((n, n));
        for r in 0..n {
            let (cols, ws) = g.row(r);
            for (&c, &w) in cols.iter().zip(ws) {
                a_hat[(r, c as usize)] = w;
            }
        }
        let x0v = random_normal_matrix::<f64>(n, 4, 1.0, 3);
        let oracle = {
            let a1 = a_hat.dot(&x0v);
            let a2 = a_hat.dot(&a1);
            (&a1 + &a2) / 2.0
        };
        let mut tape = Tape::<f64>::new();
        let x0 = tape.constant(x0v);
        let out = encode(&mut tape, &g, x0, &cfg(2, 4, 0.0), 1, false).unwrap();
        for (a, b) in tape.value(out).iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn node_permutation_equivariance() {
        // Relabeling items 0 and 1 (graph + input rows) permutes output rows.
        let g1 = graph_of(2, 2, &[(0, 0), (1, 0), (1, 1)]);
        let g2 = graph_of(2, 2, &[(0, 1), (1, 1), (1, 0)]);
        let x = random_normal_matrix::<f64>(4, 3, 1.0, 4);
        let mut swapped = x.clone();
        let row2 = swapped.row(2).to_owned();
        let row3 = swapped.row(3).to_owned();
        swapped.row_mut(2).assign(&row3);
        swapped.row_mut(3).assign(&row2);

        let mut t1 = Tape::<f64>::new();
        let x1 = t1.constant(x);
        let o1 = encode(&mut t1, &g1, x1, &cfg(2, 3, 0.0), 1, false).unwrap();
        let mut t2 = Tape::<f64>::new();
        let x2 = t2.constant(swapped);
        let o2 = encode(&mut t2, &g2, x2, &cfg(2, 3, 0.0), 1, false).unwrap();

        let v1 = t1.value(o1);
        let v2 = t2.value(o2);
        for r in 0..4 {
            let rr = match r {
                2 => 3,
                3 => 2,
                other => other,
            };
            for c in 0..3 {
                assert!((v1[(r, c)] - v2[(rr, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encode_gradient_passes_finite_differences_with_frozen_dropout() {
        let g = graph_of(2, 3, &[(0, 0), (0, 2), (1, 1), (1, 2)]);
        let mut store = ParameterStore::<f64>::new();
        store.insert("x0", random_normal_matrix(5, 3, 1.0, 5));
        let rel = grad_check(
            &mut store,
            "x0",
            |store, with_grads| {
                let mut tape = Tape::<f64>::new();
                let x0 = tape.param(store, "x0");
                let out = encode(&mut tape, &g, x0, &cfg(3, 3, 0.3), 99, true).unwrap();
                let gathered = tape.gather_rows(out, &[0, 1, 2, 3, 4]);
                let sq = tape.row_dot(gathered, gathered).unwrap();
                let sq_row = tape.transpose(sq);
                let ones = tape.constant(Matrix::ones((1, 5)));
                let total = tape.row_dot(sq_row, ones).unwrap();
                let loss = tape.add_scaled(&[(total, 0.5)]);
                if with_grads {
                    tape.backward(loss).unwrap();
                    tape.flush_grads(store);
                }
                tape.scalar_value(loss)
            },
            20,
            1e-6,
            6,
        );
        assert!(rel < 1e-4, "relative error {rel}");
    }

    fn toy_setup() -> (InteractionDataset, Arc<BipartiteGraph>, ParameterStore<f32>, CodeAssignment)
    {
        let ds = InteractionDataset::from_index_pairs(
            3,
            3,
            vec![(0, 0), (0, 1), (1, 1), (2, 2), (2, 0)],
            vec![],
            vec![],
        )
        .unwrap();
        let base = Arc::new(build_base_graph(&ds));
        let mut store = ParameterStore::new();
        store.insert(PARAM_ID_EMBED, random_normal_matrix(6, 4, 0.1, 7));
        store.insert(PARAM_CODE_EMBED, random_normal_matrix(2 * 2 * 4, 4, 0.1, 8));
        let codes = CodeAssignment {
            user_codes: Array2::from_shape_fn((3, 2), |(e, h)| ((e + h) % 4) as u32),
            item_codes: Array2::from_shape_fn((3, 2), |(e, h)| ((e + 2 * h) % 4) as u32),
            num_levels: 2,
            codes_per_level: 4,
            epoch: 0,
        };
        (ds, base, store, codes)
    }

    #[test]
    fn no_augmentation_no_dropout_views_coincide_on_user_item_rows() {
        let (ds, base, store, codes) = toy_setup();
        let aug = AugmentationConfig { p_replace: 0.0, p_add: 0.0, seed: 1 };
        let pair = build_augmented_pair(&ds, &codes, &aug, 0).unwrap();
        let mut tape = Tape::<f32>::new();
        let views = encode_all_views(
            &mut tape,
            &base,
            Some(&pair),
            &store,
            &cfg(2, 4, 0.0),
            11,
            true,
        )
        .unwrap();
        let b = tape.value(views.base);
        let a1 = tape.value(views.aug1());
        let a2 = tape.value(views.aug2());
        for r in 0..6 {
            for c in 0..4 {
                assert!((b[(r, c)] - a1[(r, c)]).abs() < 1e-6);
                assert!((a1[(r, c)] - a2[(r, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn train_mode_dropout_separates_the_two_augmented_views() {
        let (ds, base, store, codes) = toy_setup();
        let aug = AugmentationConfig { p_replace: 0.0, p_add: 0.0, seed: 1 };
        let pair = build_augmented_pair(&ds, &codes, &aug, 0).unwrap();
        let mut tape = Tape::<f32>::new();
        let views = encode_all_views(
            &mut tape,
            &base,
            Some(&pair),
            &store,
            &cfg(2, 4, 0.4),
            11,
            true,
        )
        .unwrap();
        let a1 = tape.value(views.aug1());
        let a2 = tape.value(views.aug2());
        assert!(
            a1.iter().zip(a2.iter()).any(|(x, y)| (x - y).abs() > 1e-9),
            "distinct dropout masks must produce distinct features"
        );
    }

    #[test]
    fn eval_mode_is_repeatable() {
        let (ds, base, store, codes) = toy_setup();
        let aug = AugmentationConfig { p_replace: 0.3, p_add: 0.2, seed: 1 };
        let pair = build_augmented_pair(&ds, &codes, &aug, 0).unwrap();
        let run = |seed: u64| {
            let mut tape = Tape::<f32>::new();
            let views = encode_all_views(
                &mut tape,
                &base,
                Some(&pair),
                &store,
                &cfg(2, 4, 0.4),
                seed,
                false,
            )
            .unwrap();
            tape.value(views.base).clone()
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn encode_eval_matches_tape_encode_without_dropout() {
        let (_, base, store, _) = toy_setup();
        let ev = encode_eval(&base, store.value(PARAM_ID_EMBED), 3).unwrap();
        let mut tape = Tape::<f32>::new();
        let x0 = tape.param(&store, PARAM_ID_EMBED);
        let out = encode(&mut tape, &base, x0, &cfg(3, 4, 0.0), 0, false).unwrap();
        assert_eq!(*tape.value(out), ev);
    }
}
