//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ParameterStore, Scalar};

/// Compare the analytic gradient of one parameter entry against central
/// finite differences at `num_probes` random coordinates.
///
/// `loss_fn(store, with_grads)` returns the loss and, when `with_grads` is
/// true, adds parameter gradients into the store. It must be deterministic
/// for fixed parameter values (freeze any dropout seeds). Returns the
/// maximum relative error `|g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8)`.
/// Tolerances around 1e-4 require running the store in f64.
pub fn grad_check<S, F>(
    store: &mut ParameterStore<S>,
    entry: &str,
    mut loss_fn: F,
    num_probes: usize,
    h: f64,
    probe_seed: u64,
) -> f64
where
    S: Scalar,
    F: FnMut(&mut ParameterStore<S>, bool) -> S,
{
    store.zero_grads();
    let _ = loss_fn(store, true);
    let analytic = store.entry(entry).grad.clone();
    let (rows, cols) = analytic.dim();
    assert!(rows * cols > 0, "empty parameter {entry}");

    let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
    let mut max_rel = 0.0f64;
    for _ in 0..num_probes {
        let r = rng.random_range(0..rows);
        let c = rng.random_range(0..cols);
        let orig = store.value(entry)[(r, c)].as_f64();
        store.entry_mut(entry).value[(r, c)] = S::from_f64(orig + h);
        let loss_plus = loss_fn(store, false).as_f64();
        store.entry_mut(entry).value[(r, c)] = S::from_f64(orig - h);
        let loss_minus = loss_fn(store, false).as_f64();
        store.entry_mut(entry).value[(r, c)] = S::from_f64(orig);

        let fd = (loss_plus - loss_minus) / (2.0 * h);
        let ga = analytic[(r, c)].as_f64();
        let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    store.zero_grads();
    max_rel
}
