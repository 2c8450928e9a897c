//! Numerical substrate: parameter storage with Adam state, sparse/dense
//! kernels, the reverse-mode tape and a finite-difference gradient checker.
//!
//! Training runs in f32; the whole stack is generic over [`Scalar`] so
//! gradient checking can run the identical code path in f64.

pub mod gradcheck;
pub mod tape;

pub use gradcheck::grad_check;
pub use tape::{GradStop, NodeId, Tape};

use ndarray::{Array2, NdFloat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// Floating-point element type for all kernels.
pub trait Scalar: NdFloat {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major matrix.
pub type Matrix<S> = Array2<S>;

/// Norm floor used wherever cosine similarity meets a degenerate row.
pub const NORM_EPS: f64 = 1e-12;

/// SplitMix64-style combiner for deriving well-separated sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counters for numerically degenerate events, surfaced in training logs.
#[derive(Debug, Default, Clone)]
pub struct Diagnostics {
    /// Rows that hit the norm floor in cosine similarity.
    pub zero_norm_rows: u64,
}

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

/// One named parameter with its gradient buffer and Adam state.
#[derive(Debug, Clone)]
pub struct ParamEntry<S: Scalar> {
    pub value: Matrix<S>,
    pub grad: Matrix<S>,
    adam_m: Matrix<S>,
    adam_v: Matrix<S>,
    step: u64,
}

impl<S: Scalar> ParamEntry<S> {
    fn new(value: Matrix<S>) -> Self {
        let shape = value.raw_dim();
        ParamEntry {
            value,
            grad: Matrix::zeros(shape),
            adam_m: Matrix::zeros(shape),
            adam_v: Matrix::zeros(shape),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Insertion-ordered collection of named dense parameters.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore<S: Scalar> {
    entries: Vec<(String, ParamEntry<S>)>,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-6,
        }
    }
}

impl<S: Scalar> ParameterStore<S> {
    pub fn new() -> Self {
        ParameterStore { entries: Vec::new() }
    }

    pub fn insert(&mut self, name: &str, value: Matrix<S>) {
        assert!(
            self.index_of(name).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push((name.to_string(), ParamEntry::new(value)));
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn entry(&self, name: &str) -> &ParamEntry<S> {
        let idx = self
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        &self.entries[idx].1
    }

    pub fn entry_mut(&mut self, name: &str) -> &mut ParamEntry<S> {
        let idx = self
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        &mut self.entries[idx].1
    }

    pub fn value(&self, name: &str) -> &Matrix<S> {
        &self.entry(name).value
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn add_to_grad(&mut self, name: &str, delta: &Matrix<S>) {
        let entry = self.entry_mut(name);
        entry.grad += delta;
    }

    pub fn zero_grads(&mut self) {
        for (_, e) in &mut self.entries {
            e.grad.fill(S::zero());
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry<S>)> {
        self.entries.iter().map(|(n, e)| (n.as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One Adam update over every entry (bias-corrected, coupled L2 weight
    /// decay). Gradients are zeroed afterwards.
    pub fn adam_step(&mut self, hp: &AdamParams) -> Result<()> {
        let b1 = S::from_f64(hp.beta1);
        let b2 = S::from_f64(hp.beta2);
        let lr = S::from_f64(hp.lr);
        let eps = S::from_f64(hp.eps);
        let wd = S::from_f64(hp.weight_decay);
        let one = S::one();
        for (name, e) in &mut self.entries {
            if e.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { name: name.clone() });
            }
            e.step += 1;
            let bc1 = one - S::from_f64(hp.beta1.powi(e.step as i32));
            let bc2 = one - S::from_f64(hp.beta2.powi(e.step as i32));
            ndarray::Zip::from(&mut e.value)
                .and(&mut e.adam_m)
                .and(&mut e.adam_v)
                .and(&e.grad)
                .for_each(|v, m, av, &g| {
                    let g = g + wd * *v;
                    *m = b1 * *m + (one - b1) * g;
                    *av = b2 * *av + (one - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *av / bc2;
                    *v = *v - lr * m_hat / (v_hat.sqrt() + eps);
                });
            e.grad.fill(S::zero());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw kernels (shared by the tape and by eval-mode paths)
// ---------------------------------------------------------------------------

/// Sparse-dense multiply `Y = A_hat * X` over the normalized adjacency.
/// Row-parallel; each output row is a sequential reduction, so results are
/// bit-identical regardless of thread count.
pub fn spmm_dense<S: Scalar>(graph: &BipartiteGraph, x: &Matrix<S>) -> Result<Matrix<S>> {
    let n = graph.num_nodes();
    if x.nrows() != n {
        return Err(Error::ShapeMismatch {
            op: "spmm",
            expected: format!("{n} rows"),
            got: format!("{} rows", x.nrows()),
        });
    }
    let d = x.ncols();
    let xs = x
        .as_slice()
        .expect("spmm input must be standard layout");
    let mut out = Matrix::<S>::zeros((n, d));
    {
        let out_slice = out.as_slice_mut().expect("fresh matrix is contiguous");
        out_slice
            .par_chunks_mut(d.max(1))
            .enumerate()
            .for_each(|(row, out_row)| {
                let (cols, ws) = graph.row(row);
                for (&c, &w) in cols.iter().zip(ws) {
                    let w = S::from_f64(w);
                    let src = &xs[c as usize * d..c as usize * d + d];
                    for (o, &v) in out_row.iter_mut().zip(src) {
                        *o = *o + w * v;
                    }
                }
            });
    }
    Ok(out)
}

/// Row norms floored at [`NORM_EPS`]; the second return flags floored rows.
pub(crate) fn floored_row_norms<S: Scalar>(x: &Matrix<S>) -> (Vec<S>, Vec<bool>) {
    let eps = S::from_f64(NORM_EPS);
    let mut flags = Vec::with_capacity(x.nrows());
    let norms = x
        .rows()
        .into_iter()
        .map(|row| {
            let sq = row.iter().fold(S::zero(), |acc, &v| acc + v * v);
            let norm = sq.sqrt();
            if norm < eps {
                flags.push(true);
                eps
            } else {
                flags.push(false);
                norm
            }
        })
        .collect();
    (norms, flags)
}

/// Rows scaled to (floored-)unit norm.
pub(crate) fn normalize_rows<S: Scalar>(x: &Matrix<S>, norms: &[S]) -> Matrix<S> {
    let mut out = x.clone();
    for (mut row, &n) in out.rows_mut().into_iter().zip(norms) {
        row.mapv_inplace(|v| v / n);
    }
    out
}

/// Pairwise cosine similarity `S[i,j] = a_i . b_j / (|a_i||b_j|)` with a
/// norm floor of [`NORM_EPS`]. Returns the matrix and the floored-row count.
pub fn cosine_sim_matrix<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<(Matrix<S>, u64)> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch {
            op: "cosine_sim_matrix",
            expected: format!("{} cols", a.ncols()),
            got: format!("{} cols", b.ncols()),
        });
    }
    let (na, fa) = floored_row_norms(a);
    let (nb, fb) = floored_row_norms(b);
    let a_hat = normalize_rows(a, &na);
    let b_hat = normalize_rows(b, &nb);
    let floored = fa.iter().chain(fb.iter()).filter(|&&f| f).count() as u64;
    Ok((a_hat.dot(&b_hat.t()), floored))
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (S::one() + (-x).exp()).ln()
    } else {
        (S::one() + x.exp()).ln()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Seeded normal(0, std) matrix via Box-Muller; used for embedding init.
pub fn random_normal_matrix<S: Scalar>(rows: usize, cols: usize, std: f64, seed: u64) -> Matrix<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows * cols);
    while data.len() < rows * cols {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        data.push(S::from_f64(r * theta.cos() * std));
        if data.len() < rows * cols {
            data.push(S::from_f64(r * theta.sin() * std));
        }
    }
    Matrix::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

/// Seeded matrix of unit-norm rows; used for codebook init.
pub fn random_unit_rows<S: Scalar>(rows: usize, cols: usize, seed: u64) -> Matrix<S> {
    let mut m = random_normal_matrix::<S>(rows, cols, 1.0, seed);
    let (norms, _flags) = floored_row_norms(&m);
    for (mut row, &n) in m.rows_mut().into_iter().zip(&norms) {
        row.mapv_inplace(|v| v / n);
    }
    m
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"CGCL";
const CHECKPOINT_VERSION: u32 = 1;

/// Serialize the store (values + Adam state) to the little-endian binary
/// checkpoint format.
pub fn checkpoint_bytes<S: Scalar>(store: &ParameterStore<S>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(store.entries.len() as u32).to_le_bytes());
    for (name, e) in &store.entries {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(e.value.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(e.value.ncols() as u64).to_le_bytes());
        buf.extend_from_slice(&e.step.to_le_bytes());
        for m in [&e.value, &e.adam_m, &e.adam_v] {
            for v in m.iter() {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
    }
    buf
}

pub fn save_checkpoint<S: Scalar>(store: &ParameterStore<S>, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(store);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: String,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Corrupted {
                what: self.what.clone(),
                detail: "unexpected end of file".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<ParameterStore<S>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader {
        bytes: &bytes,
        pos: 0,
        what: path.display().to_string(),
    };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Corrupted {
            what: r.what.clone(),
            detail: "bad magic header".into(),
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let num_entries = r.u32()?;
    let mut store = ParameterStore::new();
    for _ in 0..num_entries {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| Error::Corrupted {
            what: r.what.clone(),
            detail: "non-utf8 parameter name".into(),
        })?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let step = r.u64()?;
        let read_matrix = |r: &mut ByteReader| -> Result<Matrix<S>> {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(S::from_f64(f64::from(r.f32()?)));
            }
            Ok(Matrix::from_shape_vec((rows, cols), data).expect("shape matches"))
        };
        let value = read_matrix(&mut r)?;
        let adam_m = read_matrix(&mut r)?;
        let adam_v = read_matrix(&mut r)?;
        store.entries.push((
            name,
            ParamEntry {
                value,
                grad: Matrix::zeros((rows, cols)),
                adam_m,
                adam_v,
                step,
            },
        ));
    }
    if r.pos != bytes.len() {
        return Err(Error::Corrupted {
            what: r.what.clone(),
            detail: "trailing bytes".into(),
        });
    }
    Ok(store)
}
