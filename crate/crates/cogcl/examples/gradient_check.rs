//! Verify the hand-written backward pass of the full objective against
//! central finite differences on a toy instance, parameter by parameter.
//!
//! ```bash
//! cargo run --release -p cogcl --example gradient_check
//! ```

use std::sync::Arc;

use cogcl::compute::{
    grad_check, random_normal_matrix, random_unit_rows, ParameterStore, Tape,
};
use cogcl::data::{InteractionDataset, Split};
use cogcl::encoder::{encode_all_views, EncoderConfig, PARAM_CODE_EMBED, PARAM_ID_EMBED};
use cogcl::graph::{build_augmented_pair, build_base_graph, AugmentationConfig};
use cogcl::objective::{self, LossWeights};
use cogcl::quantizer::{codebook_name, refresh_codes, QuantScheme, QuantizerConfig, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let ds = InteractionDataset::from_index_pairs(
        4,
        6,
        vec![(0, 0), (0, 1), (1, 2), (1, 3), (2, 4), (2, 0), (3, 5), (3, 2)],
        vec![],
        vec![],
    )
    .unwrap();
    let d = 8;
    let q = QuantizerConfig { scheme: QuantScheme::Rq, num_levels: 2, codebook_size: 4, tau: 0.2 };
    let enc = EncoderConfig { num_layers: 3, embed_dim: d, dropout_rate: 0.2 };
    let weights = LossWeights { lambda: 0.5, mu: 0.3, eta: 0.2, ..Default::default() };

    // f64 store for finite-difference accuracy.
    let mut store = ParameterStore::<f64>::new();
    store.insert(PARAM_ID_EMBED, random_normal_matrix(10, d, 0.3, 1));
    store.insert(PARAM_CODE_EMBED, random_normal_matrix(16, d, 0.3, 2));
    for side in [Side::User, Side::Item] {
        for h in 0..2 {
            store.insert(&codebook_name(side, h), random_unit_rows(4, d, 10 + h as u64));
        }
    }

    // Per-epoch artifacts are frozen; the loss is a function of parameters.
    let base_graph = Arc::new(build_base_graph(&ds));
    let codes = refresh_codes(&store, &base_graph, &enc, &q, 0).unwrap();
    let aug = AugmentationConfig { p_replace: 0.4, p_add: 0.4, seed: 5 };
    let pair = build_augmented_pair(&ds, &codes, &aug, 0).unwrap();
    let index = objective::build_positive_index(&codes, &ds, 50, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let batch = objective::batch_from_pairs(
        &ds.train.clone(),
        ds.num_items,
        &ds.user_items(Split::Train),
        &index,
        &mut rng,
    );

    let names: Vec<String> = store.names().iter().map(|s| s.to_string()).collect();
    for name in names {
        let rel = grad_check(
            &mut store,
            &name,
            |store, with_grads| {
                let mut tape = Tape::<f64>::new();
                let views =
                    encode_all_views(&mut tape, &base_graph, Some(&pair), store, &enc, 99, true)
                        .unwrap();
                let (total, _) = objective::total_loss(
                    &mut tape, &views, &batch, store, &weights, &q, ds.num_users,
                )
                .unwrap();
                if with_grads {
                    tape.backward(total).unwrap();
                    tape.flush_grads(store);
                }
                tape.scalar_value(total)
            },
            16,
            1e-6,
            1234,
        );
        println!("{name:<18} max relative error {rel:.3e}");
        assert!(rel < 1e-4);
    }
    println!("all parameters pass at 1e-4");
}
