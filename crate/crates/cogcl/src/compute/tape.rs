//! Reverse-mode differentiation tape over dense matrices.
//!
//! Every kernel records its application; `backward` replays the records in
//! exact reverse order, accumulating gradients per node. Parameter leaves
//! copy their value in at record time and flush their accumulated gradient
//! back into the [`ParameterStore`] via [`Tape::flush_grads`]. The tape is
//! cleared per batch.

use std::sync::Arc;

use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    floored_row_norms, normalize_rows, sigmoid, softplus, spmm_dense, Diagnostics, Matrix,
    ParameterStore, Scalar,
};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Gradient-stop switch for contrastive kernels. Values are never affected,
/// only which similarity terms propagate gradient.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum GradStop {
    #[default]
    None,
    /// Detach positive-pair similarities.
    NoAlignment,
    /// Detach negative-pair similarities.
    NoUniformity,
}

enum Op<S: Scalar> {
    Param { name: String },
    Constant,
    StopGrad,
    ConcatRows { a: NodeId, b: NodeId },
    GatherRows { x: NodeId, indices: Vec<u32> },
    Spmm { graph: Arc<BipartiteGraph>, x: NodeId },
    Dropout { x: NodeId, mask: Matrix<S> },
    Sub { a: NodeId, b: NodeId },
    SliceCols { x: NodeId, start: usize },
    MeanOf { xs: Vec<NodeId> },
    Transpose { x: NodeId },
    DiagToCol { x: NodeId },
    CosineSim { a: NodeId, b: NodeId },
    RowDot { a: NodeId, b: NodeId },
    BprFromScores { pos: NodeId, neg: NodeId },
    InfoNceRows {
        pos: NodeId,
        pool: NodeId,
        excl_diag: bool,
        tau: S,
        stop: GradStop,
    },
    SoftmaxCeRows { sims: NodeId, targets: Vec<u32>, tau: S },
    AddScaled { terms: Vec<(NodeId, S)> },
}

struct TapeNode<S: Scalar> {
    value: Matrix<S>,
    op: Op<S>,
}

/// Recorded forward pass plus per-node gradient buffers.
#[derive(Default)]
pub struct Tape<S: Scalar> {
    nodes: Vec<TapeNode<S>>,
    grads: Vec<Option<Matrix<S>>>,
    pub diagnostics: Diagnostics,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.grads.clear();
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, id: NodeId) -> &Matrix<S> {
        &self.nodes[id.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar_value(&self, id: NodeId) -> S {
        let v = &self.nodes[id.0].value;
        debug_assert_eq!(v.dim(), (1, 1));
        v[(0, 0)]
    }

    /// Accumulated gradient of a node; `None` until `backward` reaches it.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix<S>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, value: Matrix<S>, op: Op<S>) -> NodeId {
        self.nodes.push(TapeNode { value, op });
        NodeId(self.nodes.len() - 1)
    }

    // -- leaves ------------------------------------------------------------

    /// Leaf referencing a named parameter; the value is copied in.
    pub fn param(&mut self, store: &ParameterStore<S>, name: &str) -> NodeId {
        self.push(
            store.value(name).clone(),
            Op::Param { name: name.to_string() },
        )
    }

    pub fn constant(&mut self, value: Matrix<S>) -> NodeId {
        self.push(value, Op::Constant)
    }

    // -- structural kernels --------------------------------------------------

    /// Identity forward, zero backward.
    pub fn stop_grad(&mut self, x: NodeId) -> NodeId {
        self.push(self.nodes[x.0].value.clone(), Op::StopGrad)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.ncols() != vb.ncols() {
            return Err(Error::ShapeMismatch {
                op: "concat_rows",
                expected: format!("{} cols", va.ncols()),
                got: format!("{} cols", vb.ncols()),
            });
        }
        let value = ndarray::concatenate(Axis(0), &[va.view(), vb.view()])
            .expect("column counts checked");
        Ok(self.push(value, Op::ConcatRows { a, b }))
    }

    pub fn gather_rows(&mut self, x: NodeId, indices: &[u32]) -> NodeId {
        let v = &self.nodes[x.0].value;
        let mut out = Matrix::zeros((indices.len(), v.ncols()));
        for (r, &src) in indices.iter().enumerate() {
            out.row_mut(r).assign(&v.row(src as usize));
        }
        self.push(
            out,
            Op::GatherRows {
                x,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.dim() != vb.dim() {
            return Err(Error::ShapeMismatch {
                op: "sub",
                expected: format!("{:?}", va.dim()),
                got: format!("{:?}", vb.dim()),
            });
        }
        Ok(self.push(va - vb, Op::Sub { a, b }))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = &self.nodes[x.0].value;
        let value = v.slice(ndarray::s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols { x, start })
    }

    /// Arithmetic mean of same-shaped matrices.
    pub fn mean_of(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        assert!(!xs.is_empty(), "mean_of needs at least one input");
        let dim = self.nodes[xs[0].0].value.raw_dim();
        let mut acc = Matrix::<S>::zeros(dim.clone());
        for &x in xs {
            let v = &self.nodes[x.0].value;
            if v.raw_dim() != dim {
                return Err(Error::ShapeMismatch {
                    op: "mean_of",
                    expected: format!("{dim:?}"),
                    got: format!("{:?}", v.raw_dim()),
                });
            }
            acc += v;
        }
        let scale = S::from_f64(1.0 / xs.len() as f64);
        acc.mapv_inplace(|v| v * scale);
        Ok(self.push(acc, Op::MeanOf { xs: xs.to_vec() }))
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.t().to_owned();
        self.push(value, Op::Transpose { x })
    }

    /// Main diagonal of a square matrix as an n x 1 column.
    pub fn diag_to_col(&mut self, x: NodeId) -> Result<NodeId> {
        let v = &self.nodes[x.0].value;
        if v.nrows() != v.ncols() {
            return Err(Error::ShapeMismatch {
                op: "diag_to_col",
                expected: "square matrix".into(),
                got: format!("{:?}", v.dim()),
            });
        }
        let n = v.nrows();
        let value = Matrix::from_shape_fn((n, 1), |(i, _)| v[(i, i)]);
        Ok(self.push(value, Op::DiagToCol { x }))
    }

    /// Weighted sum of same-shaped nodes.
    pub fn add_scaled(&mut self, terms: &[(NodeId, S)]) -> NodeId {
        assert!(!terms.is_empty(), "add_scaled needs at least one term");
        let dim = self.nodes[terms[0].0 .0].value.raw_dim();
        let mut acc = Matrix::<S>::zeros(dim);
        for &(x, w) in terms {
            acc.scaled_add(w, &self.nodes[x.0].value);
        }
        self.push(acc, Op::AddScaled { terms: terms.to_vec() })
    }

    // -- numeric kernels -----------------------------------------------------

    /// `Y = A_hat X` over the graph's normalized adjacency.
    pub fn spmm(&mut self, graph: &Arc<BipartiteGraph>, x: NodeId) -> Result<NodeId> {
        let value = spmm_dense(graph, &self.nodes[x.0].value)?;
        Ok(self.push(
            value,
            Op::Spmm {
                graph: Arc::clone(graph),
                x,
            },
        ))
    }

    /// Inverted dropout. Identity (no node recorded) in eval mode or at
    /// rate 0; otherwise zeroes elements with probability `rate` and scales
    /// survivors by `1/(1-rate)`, saving the mask for backward.
    pub fn dropout(&mut self, x: NodeId, rate: f64, seed: u64, train: bool) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidInput(format!(
                "dropout rate must be in [0,1), got {rate}"
            )));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let v = &self.nodes[x.0].value;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = S::from_f64(1.0 / (1.0 - rate));
        let mask = Matrix::from_shape_fn(v.raw_dim(), |_| {
            if rng.random::<f64>() < rate {
                S::zero()
            } else {
                scale
            }
        });
        let value = v * &mask;
        Ok(self.push(value, Op::Dropout { x, mask }))
    }

    /// Pairwise cosine similarity with norm floor; zero-norm rows are
    /// counted in the tape diagnostics.
    pub fn cosine_sim(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.ncols() != vb.ncols() {
            return Err(Error::ShapeMismatch {
                op: "cosine_sim",
                expected: format!("{} cols", va.ncols()),
                got: format!("{} cols", vb.ncols()),
            });
        }
        let (na, fa) = floored_row_norms(va);
        let (nb, fb) = floored_row_norms(vb);
        self.diagnostics.zero_norm_rows +=
            fa.iter().chain(fb.iter()).filter(|&&f| f).count() as u64;
        let a_hat = normalize_rows(va, &na);
        let b_hat = normalize_rows(vb, &nb);
        let value = a_hat.dot(&b_hat.t());
        Ok(self.push(value, Op::CosineSim { a, b }))
    }

    /// Row-wise inner products of two n x d matrices, as n x 1.
    pub fn row_dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.dim() != vb.dim() {
            return Err(Error::ShapeMismatch {
                op: "row_dot",
                expected: format!("{:?}", va.dim()),
                got: format!("{:?}", vb.dim()),
            });
        }
        let n = va.nrows();
        let value = Matrix::from_shape_fn((n, 1), |(i, _)| {
            va.row(i)
                .iter()
                .zip(vb.row(i))
                .fold(S::zero(), |acc, (&x, &y)| acc + x * y)
        });
        Ok(self.push(value, Op::RowDot { a, b }))
    }

    /// Mean of `-log sigmoid(pos - neg)` over score columns.
    pub fn bpr_from_scores(&mut self, pos: NodeId, neg: NodeId) -> Result<NodeId> {
        let (vp, vn) = (&self.nodes[pos.0].value, &self.nodes[neg.0].value);
        if vp.dim() != vn.dim() || vp.ncols() != 1 {
            return Err(Error::ShapeMismatch {
                op: "bpr_from_scores",
                expected: "matching n x 1 score columns".into(),
                got: format!("{:?} vs {:?}", vp.dim(), vn.dim()),
            });
        }
        let n = vp.nrows();
        let mut acc = S::zero();
        for i in 0..n {
            acc = acc + softplus(vn[(i, 0)] - vp[(i, 0)]);
        }
        let value = Matrix::from_elem((1, 1), acc / S::from_f64(n as f64));
        Ok(self.push(value, Op::BprFromScores { pos, neg }))
    }

    /// Mean over anchors of `-log( e^{pos_i/tau} / (e^{pos_i/tau} +
    /// sum_j e^{pool_ij/tau}) )`, optionally excluding the diagonal of the
    /// pool (used when the positive is itself a pool row).
    pub fn info_nce_rows(
        &mut self,
        pos: NodeId,
        pool: NodeId,
        excl_diag: bool,
        tau: f64,
        stop: GradStop,
    ) -> Result<NodeId> {
        let (vp, vq) = (&self.nodes[pos.0].value, &self.nodes[pool.0].value);
        let n = vp.nrows();
        if vp.ncols() != 1 || vq.nrows() != n || (excl_diag && vq.ncols() != n) {
            return Err(Error::ShapeMismatch {
                op: "info_nce_rows",
                expected: format!("pos {n}x1, pool {n}xm (square when excl_diag)"),
                got: format!("{:?} vs {:?}", vp.dim(), vq.dim()),
            });
        }
        if tau <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let t = S::from_f64(tau);
        let mut acc = S::zero();
        for i in 0..n {
            let z_pos = vp[(i, 0)] / t;
            let mut m = z_pos;
            for j in 0..vq.ncols() {
                if excl_diag && j == i {
                    continue;
                }
                let z = vq[(i, j)] / t;
                if z > m {
                    m = z;
                }
            }
            let mut denom = (z_pos - m).exp();
            for j in 0..vq.ncols() {
                if excl_diag && j == i {
                    continue;
                }
                denom = denom + (vq[(i, j)] / t - m).exp();
            }
            acc = acc + (m + denom.ln() - z_pos);
        }
        let value = Matrix::from_elem((1, 1), acc / S::from_f64(n as f64));
        Ok(self.push(
            value,
            Op::InfoNceRows {
                pos,
                pool,
                excl_diag,
                tau: t,
                stop,
            },
        ))
    }

    /// Mean over rows of `-log softmax(sims_i / tau)[target_i]`.
    pub fn softmax_ce_rows(&mut self, sims: NodeId, targets: &[u32], tau: f64) -> Result<NodeId> {
        let v = &self.nodes[sims.0].value;
        let (n, m) = v.dim();
        if targets.len() != n {
            return Err(Error::ShapeMismatch {
                op: "softmax_ce_rows",
                expected: format!("{n} targets"),
                got: format!("{}", targets.len()),
            });
        }
        if tau <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let t = S::from_f64(tau);
        let mut acc = S::zero();
        for i in 0..n {
            debug_assert!((targets[i] as usize) < m);
            let mut max_z = S::neg_infinity();
            for j in 0..m {
                let z = v[(i, j)] / t;
                if z > max_z {
                    max_z = z;
                }
            }
            let mut denom = S::zero();
            for j in 0..m {
                denom = denom + (v[(i, j)] / t - max_z).exp();
            }
            let z_t = v[(i, targets[i] as usize)] / t;
            acc = acc + (max_z + denom.ln() - z_t);
        }
        let value = Matrix::from_elem((1, 1), acc / S::from_f64(n as f64));
        Ok(self.push(
            value,
            Op::SoftmaxCeRows {
                sims,
                targets: targets.to_vec(),
                tau: t,
            },
        ))
    }

    // -- backward ------------------------------------------------------------

    /// Reverse sweep from a scalar root. Node gradients stay readable via
    /// [`Tape::grad`] until the tape is cleared.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let root_val = &self.nodes[root.0].value;
        if root_val.dim() != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                expected: "1x1 root".into(),
                got: format!("{:?}", root_val.dim()),
            });
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[root.0] = Some(Matrix::ones((1, 1)));

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            self.accumulate_inputs(idx, &g);
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    /// Add every parameter leaf's accumulated gradient into the store.
    pub fn flush_grads(&self, store: &mut ParameterStore<S>) {
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param { name } = &node.op {
                if let Some(Some(g)) = self.grads.get(idx) {
                    store.add_to_grad(name, g);
                }
            }
        }
    }

    fn accumulate_inputs(&mut self, idx: usize, g: &Matrix<S>) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;

        let add = |grads: &mut Vec<Option<Matrix<S>>>, target: NodeId, delta: Matrix<S>| {
            match &mut grads[target.0] {
                Some(acc) => *acc += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        let add_to = |grads: &mut Vec<Option<Matrix<S>>>,
                      target: NodeId,
                      f: &mut dyn FnMut(&mut Matrix<S>)| {
            if grads[target.0].is_none() {
                grads[target.0] = Some(Matrix::zeros(nodes[target.0].value.raw_dim()));
            }
            f(grads[target.0].as_mut().expect("just initialized"));
        };

        match &nodes[idx].op {
            Op::Param { .. } | Op::Constant | Op::StopGrad => {}
            Op::ConcatRows { a, b } => {
                let ra = nodes[a.0].value.nrows();
                add(grads, *a, g.slice(ndarray::s![..ra, ..]).to_owned());
                add(grads, *b, g.slice(ndarray::s![ra.., ..]).to_owned());
            }
            Op::GatherRows { x, indices } => {
                add_to(grads, *x, &mut |gx| {
                    for (r, &src) in indices.iter().enumerate() {
                        let mut row = gx.row_mut(src as usize);
                        row += &g.row(r);
                    }
                });
            }
            Op::Spmm { graph, x } => {
                let delta = spmm_dense(graph, g).expect("shapes fixed at record time");
                add(grads, *x, delta);
            }
            Op::Dropout { x, mask } => {
                add(grads, *x, g * mask);
            }
            Op::Sub { a, b } => {
                add(grads, *a, g.clone());
                add_to(grads, *b, &mut |gb| *gb -= g);
            }
            Op::SliceCols { x, start } => {
                let len = g.ncols();
                add_to(grads, *x, &mut |gx| {
                    let mut slice = gx.slice_mut(ndarray::s![.., *start..*start + len]);
                    slice += g;
                });
            }
            Op::MeanOf { xs } => {
                let scale = S::from_f64(1.0 / xs.len() as f64);
                for &x in xs {
                    add(grads, x, g * scale);
                }
            }
            Op::Transpose { x } => {
                add(grads, *x, g.t().to_owned());
            }
            Op::DiagToCol { x } => {
                add_to(grads, *x, &mut |gx| {
                    for i in 0..g.nrows() {
                        gx[(i, i)] = gx[(i, i)] + g[(i, 0)];
                    }
                });
            }
            Op::CosineSim { a, b } => {
                let va = &nodes[a.0].value;
                let vb = &nodes[b.0].value;
                let s = &nodes[idx].value;
                let (na, fa) = floored_row_norms(va);
                let (nb, fb) = floored_row_norms(vb);
                let a_hat = normalize_rows(va, &na);
                let b_hat = normalize_rows(vb, &nb);

                // d s_ij / d a_i = (b_hat_j - [not floored] s_ij a_hat_i) / na_i
                let gs = g * s;
                let row_w = gs.sum_axis(Axis(1));
                let mut ga = g.dot(&b_hat);
                for (i, mut row) in ga.rows_mut().into_iter().enumerate() {
                    if !fa[i] {
                        row.scaled_add(-row_w[i], &a_hat.row(i));
                    }
                    row.mapv_inplace(|v| v / na[i]);
                }
                add(grads, *a, ga);

                let col_w = gs.sum_axis(Axis(0));
                let mut gb = g.t().dot(&a_hat);
                for (j, mut row) in gb.rows_mut().into_iter().enumerate() {
                    if !fb[j] {
                        row.scaled_add(-col_w[j], &b_hat.row(j));
                    }
                    row.mapv_inplace(|v| v / nb[j]);
                }
                add(grads, *b, gb);
            }
            Op::RowDot { a, b } => {
                let va = &nodes[a.0].value;
                let vb = &nodes[b.0].value;
                add_to(grads, *a, &mut |ga| {
                    for (i, mut row) in ga.rows_mut().into_iter().enumerate() {
                        row.scaled_add(g[(i, 0)], &vb.row(i));
                    }
                });
                add_to(grads, *b, &mut |gb| {
                    for (i, mut row) in gb.rows_mut().into_iter().enumerate() {
                        row.scaled_add(g[(i, 0)], &va.row(i));
                    }
                });
            }
            Op::BprFromScores { pos, neg } => {
                let vp = &nodes[pos.0].value;
                let vn = &nodes[neg.0].value;
                let n = vp.nrows();
                let scale = g[(0, 0)] / S::from_f64(n as f64);
                add_to(grads, *pos, &mut |gp| {
                    for i in 0..n {
                        let c = scale * sigmoid(vn[(i, 0)] - vp[(i, 0)]);
                        gp[(i, 0)] = gp[(i, 0)] - c;
                    }
                });
                add_to(grads, *neg, &mut |gn| {
                    for i in 0..n {
                        let c = scale * sigmoid(vn[(i, 0)] - vp[(i, 0)]);
                        gn[(i, 0)] = gn[(i, 0)] + c;
                    }
                });
            }
            Op::InfoNceRows {
                pos,
                pool,
                excl_diag,
                tau,
                stop,
            } => {
                let vp = &nodes[pos.0].value;
                let vq = &nodes[pool.0].value;
                let n = vp.nrows();
                let m = vq.ncols();
                let t = *tau;
                let scale = g[(0, 0)] / (S::from_f64(n as f64) * t);
                let mut gp = Matrix::<S>::zeros((n, 1));
                let mut gq = Matrix::<S>::zeros((n, m));
                for i in 0..n {
                    let z_pos = vp[(i, 0)] / t;
                    let mut max_z = z_pos;
                    for j in 0..m {
                        if *excl_diag && j == i {
                            continue;
                        }
                        let z = vq[(i, j)] / t;
                        if z > max_z {
                            max_z = z;
                        }
                    }
                    let e_pos = (z_pos - max_z).exp();
                    let mut denom = e_pos;
                    for j in 0..m {
                        if *excl_diag && j == i {
                            continue;
                        }
                        denom = denom + (vq[(i, j)] / t - max_z).exp();
                    }
                    if *stop != GradStop::NoAlignment {
                        gp[(i, 0)] = scale * (e_pos / denom - S::one());
                    }
                    if *stop != GradStop::NoUniformity {
                        for j in 0..m {
                            if *excl_diag && j == i {
                                continue;
                            }
                            gq[(i, j)] = scale * (vq[(i, j)] / t - max_z).exp() / denom;
                        }
                    }
                }
                add(grads, *pos, gp);
                add(grads, *pool, gq);
            }
            Op::SoftmaxCeRows { sims, targets, tau } => {
                let v = &nodes[sims.0].value;
                let (n, m) = v.dim();
                let t = *tau;
                let scale = g[(0, 0)] / (S::from_f64(n as f64) * t);
                let mut gs = Matrix::<S>::zeros((n, m));
                for i in 0..n {
                    let mut max_z = S::neg_infinity();
                    for j in 0..m {
                        let z = v[(i, j)] / t;
                        if z > max_z {
                            max_z = z;
                        }
                    }
                    let mut denom = S::zero();
                    for j in 0..m {
                        denom = denom + (v[(i, j)] / t - max_z).exp();
                    }
                    for j in 0..m {
                        let p = (v[(i, j)] / t - max_z).exp() / denom;
                        let delta = if j == targets[i] as usize {
                            S::one()
                        } else {
                            S::zero()
                        };
                        gs[(i, j)] = scale * (p - delta);
                    }
                }
                add(grads, *sims, gs);
            }
            Op::AddScaled { terms } => {
                for &(x, w) in terms {
                    add(grads, x, g * w);
                }
            }
        }
    }
}
