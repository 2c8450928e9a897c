//! End-to-end multi-level vector quantization of user/item representations.
//!
//! Assignment is the argmax of a cosine-similarity softmax against each
//! level's codebook (residual levels by default, sub-vector levels for PQ);
//! the learning signal is the cross-entropy of that softmax, flowing to both
//! the representations and the codebook vectors. Hard assignments themselves
//! are not back-propagated; no straight-through estimator is used.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::compute::{cosine_sim_matrix, Matrix, NodeId, ParameterStore, Scalar, Tape};
use crate::encoder::{self, EncoderConfig, PARAM_ID_EMBED};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// Multi-level quantization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuantScheme {
    /// Residual quantization: each level quantizes the previous residual.
    #[default]
    Rq,
    /// Product quantization: the vector splits into independent sub-vectors.
    Pq,
}

/// Entity side for codebook naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

/// Store key of the level-`h` codebook for one side.
pub fn codebook_name(side: Side, level: usize) -> String {
    format!("codebook_{}_{}", side.name(), level)
}

#[derive(Debug, Clone, Copy)]
pub struct QuantizerConfig {
    pub scheme: QuantScheme,
    /// Number of code levels H.
    pub num_levels: usize,
    /// Codebook size K per level.
    pub codebook_size: usize,
    /// Softmax temperature, shared with the contrastive losses.
    pub tau: f64,
}

impl QuantizerConfig {
    pub fn validate(&self, embed_dim: usize) -> Result<()> {
        if self.num_levels == 0 {
            return Err(Error::InvalidInput("need at least one code level".into()));
        }
        if self.codebook_size < 2 {
            return Err(Error::InvalidInput("codebook size must be at least 2".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        if self.scheme == QuantScheme::Pq && embed_dim % self.num_levels != 0 {
            return Err(Error::InvalidInput(format!(
                "product quantization needs embed_dim divisible by num_levels ({embed_dim} % {})",
                self.num_levels
            )));
        }
        Ok(())
    }

    /// Vector dimension seen by each level's codebook.
    pub fn level_dim(&self, embed_dim: usize) -> usize {
        match self.scheme {
            QuantScheme::Rq => embed_dim,
            QuantScheme::Pq => embed_dim / self.num_levels,
        }
    }
}

/// Per-entity discrete codes for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeAssignment {
    /// num_users x H code indices.
    pub user_codes: Array2<u32>,
    /// num_items x H code indices.
    pub item_codes: Array2<u32>,
    pub num_levels: usize,
    pub codes_per_level: usize,
    pub epoch: u64,
}

impl CodeAssignment {
    /// Fraction of entities assigned to the most popular code, per
    /// (side, level); a collapse diagnostic, not an assertion.
    pub fn max_code_share(&self) -> Vec<f64> {
        let mut shares = Vec::new();
        for codes in [&self.user_codes, &self.item_codes] {
            let n = codes.nrows().max(1);
            for h in 0..self.num_levels {
                let mut counts = vec![0usize; self.codes_per_level];
                for r in 0..codes.nrows() {
                    counts[codes[(r, h)] as usize] += 1;
                }
                shares.push(counts.iter().copied().max().unwrap_or(0) as f64 / n as f64);
            }
        }
        shares
    }
}

/// Row-wise argmax with ties broken toward the lowest index.
pub(crate) fn argmax_rows<S: Scalar>(sims: &Matrix<S>) -> Vec<u32> {
    sims.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_v = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            best as u32
        })
        .collect()
}

/// Assign H codes to each row of `z` against one side's codebooks.
/// Returns the codes and the per-level inputs (residuals for RQ,
/// sub-vectors for PQ).
pub fn assign_codes<S: Scalar>(
    z: &Matrix<S>,
    books: &[&Matrix<S>],
    cfg: &QuantizerConfig,
) -> Result<(Array2<u32>, Vec<Matrix<S>>)> {
    cfg.validate(z.ncols())?;
    assert_eq!(books.len(), cfg.num_levels, "one codebook per level");
    let n = z.nrows();
    let mut codes = Array2::<u32>::zeros((n, cfg.num_levels));
    let mut level_inputs = Vec::with_capacity(cfg.num_levels);

    match cfg.scheme {
        QuantScheme::Rq => {
            let mut current = z.clone();
            for h in 0..cfg.num_levels {
                let (sims, _) = cosine_sim_matrix(&current, books[h])?;
                let ch = argmax_rows(&sims);
                level_inputs.push(current.clone());
                let mut next = current;
                for (r, &k) in ch.iter().enumerate() {
                    let mut row = next.row_mut(r);
                    row -= &books[h].row(k as usize);
                }
                for (r, &k) in ch.iter().enumerate() {
                    codes[(r, h)] = k;
                }
                current = next;
            }
        }
        QuantScheme::Pq => {
            let sub = cfg.level_dim(z.ncols());
            for h in 0..cfg.num_levels {
                let part = z.slice(ndarray::s![.., h * sub..(h + 1) * sub]).to_owned();
                let (sims, _) = cosine_sim_matrix(&part, books[h])?;
                let ch = argmax_rows(&sims);
                for (r, &k) in ch.iter().enumerate() {
                    codes[(r, h)] = k;
                }
                level_inputs.push(part);
            }
        }
    }
    Ok((codes, level_inputs))
}

/// Tape-recorded code loss for one side over batch representations.
///
/// Assignment runs live on the current values; the loss is the mean over
/// batch and levels of the cosine-softmax cross-entropy, with gradients
/// reaching the representations (through residuals for RQ) and the
/// codebooks. Returns the loss node and the codes used.
pub fn code_loss<S: Scalar>(
    tape: &mut Tape<S>,
    reps: NodeId,
    store: &ParameterStore<S>,
    side: Side,
    cfg: &QuantizerConfig,
) -> Result<(NodeId, Array2<u32>)> {
    let d = tape.value(reps).ncols();
    cfg.validate(d)?;
    let n = tape.value(reps).nrows();
    let mut codes = Array2::<u32>::zeros((n, cfg.num_levels));
    let mut ce_terms = Vec::with_capacity(cfg.num_levels);

    let mut current = reps;
    for h in 0..cfg.num_levels {
        let level_input = match cfg.scheme {
            QuantScheme::Rq => current,
            QuantScheme::Pq => {
                let sub = cfg.level_dim(d);
                tape.slice_cols(reps, h * sub, sub)
            }
        };
        let book = tape.param(store, &codebook_name(side, h));
        let sims = tape.cosine_sim(level_input, book)?;
        let ch = argmax_rows(tape.value(sims));
        for (r, &k) in ch.iter().enumerate() {
            codes[(r, h)] = k;
        }
        ce_terms.push(tape.softmax_ce_rows(sims, &ch, cfg.tau)?);
        if cfg.scheme == QuantScheme::Rq && h + 1 < cfg.num_levels {
            let picked = tape.gather_rows(book, &ch);
            current = tape.sub(level_input, picked)?;
        }
    }
    let w = S::from_f64(1.0 / cfg.num_levels as f64);
    let terms: Vec<(NodeId, S)> = ce_terms.into_iter().map(|t| (t, w)).collect();
    Ok((tape.add_scaled(&terms), codes))
}

/// Collect one side's codebook values from the store.
pub fn side_books<'a, S: Scalar>(
    store: &'a ParameterStore<S>,
    side: Side,
    num_levels: usize,
) -> Vec<&'a Matrix<S>> {
    (0..num_levels)
        .map(|h| store.value(&codebook_name(side, h)))
        .collect()
}

/// Epoch-boundary refresh: eval-mode encode of the full population over the
/// base graph, then assignment of every user and item.
pub fn refresh_codes<S: Scalar>(
    store: &ParameterStore<S>,
    base_graph: &BipartiteGraph,
    enc_cfg: &EncoderConfig,
    cfg: &QuantizerConfig,
    epoch: u64,
) -> Result<CodeAssignment> {
    let z = encoder::encode_eval(base_graph, store.value(PARAM_ID_EMBED), enc_cfg.num_layers)?;
    let num_users = base_graph.num_users;
    let users = z.slice(ndarray::s![..num_users, ..]).to_owned();
    let items = z.slice(ndarray::s![num_users.., ..]).to_owned();
    let (user_codes, _) = assign_codes(&users, &side_books(store, Side::User, cfg.num_levels), cfg)?;
    let (item_codes, _) = assign_codes(&items, &side_books(store, Side::Item, cfg.num_levels), cfg)?;
    Ok(CodeAssignment {
        user_codes,
        item_codes,
        num_levels: cfg.num_levels,
        codes_per_level: cfg.codebook_size,
        epoch,
    })
}
