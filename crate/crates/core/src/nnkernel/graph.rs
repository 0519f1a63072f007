//! Reverse-mode differentiation over a tape of vector operations.
//!
//! Every forward op appends a node holding its value; [`Graph::backward`]
//! walks the tape in reverse and accumulates parameter gradients.

use super::params::{Gradients, ParamId, ParamStore};
use super::KernelError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<S> {
    Constant,
    Param(ParamId),
    MatVec(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    OneMinus(NodeId),
    Scale(NodeId, S),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Row(NodeId, usize),
    Concat(Vec<NodeId>),
    Sum(Vec<NodeId>),
    /// Probabilities are kept in the node's auxiliary buffer.
    SoftmaxCrossEntropy(NodeId, usize),
    AbsError(NodeId, Vec<S>),
    SquaredError(NodeId, Vec<S>),
}

#[derive(Debug, Clone)]
struct Node<S> {
    op: Op<S>,
    rows: usize,
    cols: usize,
    value: Vec<S>,
    aux: Vec<S>,
}

/// A computation tape bound to a parameter store.
pub struct Graph<'p, S> {
    params: &'p ParamStore<S>,
    nodes: Vec<Node<S>>,
}

fn shape_err(msg: String) -> KernelError {
    KernelError::Shape(msg)
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(params: &'p ParamStore<S>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore<S> {
        self.params
    }

    fn push(&mut self, op: Op<S>, rows: usize, cols: usize, value: Vec<S>) -> NodeId {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            aux: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[S] {
        let node = &self.nodes[id.0];
        match node.op {
            Op::Param(p) => &self.params.get(p).data,
            _ => &node.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    pub fn len_of(&self, id: NodeId) -> usize {
        let (r, c) = self.shape(id);
        r * c
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, id: NodeId) -> S {
        self.value(id)[0]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn constant(&mut self, values: Vec<S>) -> NodeId {
        let n = values.len();
        self.push(Op::Constant, n, 1, values)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let t = self.params.get(id);
        let (r, c) = (t.rows, t.cols);
        self.push(Op::Param(id), r, c, Vec::new())
    }

    pub fn matvec(&mut self, m: NodeId, x: NodeId) -> Result<NodeId, KernelError> {
        let (r, c) = self.shape(m);
        if self.len_of(x) != c {
            return Err(shape_err(format!(
                "matvec: {r}x{c} matrix times vector of {}",
                self.len_of(x)
            )));
        }
        let mv = self.value(m);
        let xv = self.value(x);
        let out = (0..r)
            .map(|i| mv[i * c..(i + 1) * c].iter().zip(xv).map(|(a, b)| *a * *b).sum())
            .collect();
        Ok(self.push(Op::MatVec(m, x), r, 1, out))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, name: &str) -> Result<(), KernelError> {
        if self.len_of(a) != self.len_of(b) {
            return Err(shape_err(format!(
                "{name}: lengths {} and {}",
                self.len_of(a),
                self.len_of(b)
            )));
        }
        Ok(())
    }

    fn zip_map(&self, a: NodeId, b: NodeId, f: impl Fn(S, S) -> S) -> Vec<S> {
        self.value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        self.binary(a, b, "add")?;
        let v = self.zip_map(a, b, |x, y| x + y);
        let (r, c) = self.shape(a);
        Ok(self.push(Op::Add(a, b), r, c, v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        self.binary(a, b, "sub")?;
        let v = self.zip_map(a, b, |x, y| x - y);
        let (r, c) = self.shape(a);
        Ok(self.push(Op::Sub(a, b), r, c, v))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, KernelError> {
        self.binary(a, b, "mul")?;
        let v = self.zip_map(a, b, |x, y| x * y);
        let (r, c) = self.shape(a);
        Ok(self.push(Op::Mul(a, b), r, c, v))
    }

    fn unary(&mut self, a: NodeId, op: Op<S>, f: impl Fn(S) -> S) -> NodeId {
        let v = self.value(a).iter().map(|x| f(*x)).collect();
        let (r, c) = self.shape(a);
        self.push(op, r, c, v)
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::OneMinus(a), |x| S::one() - x)
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu(a), |x| if x > S::zero() { x } else { S::zero() })
    }

    /// Row `index` of a matrix node, as a vector (embedding lookup).
    pub fn row(&mut self, m: NodeId, index: usize) -> Result<NodeId, KernelError> {
        let (r, c) = self.shape(m);
        if index >= r {
            return Err(shape_err(format!("row {index} of a {r}-row matrix")));
        }
        let v = self.value(m)[index * c..(index + 1) * c].to_vec();
        Ok(self.push(Op::Row(m, index), c, 1, v))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v: Vec<S> = parts.iter().flat_map(|p| self.value(*p).iter().copied()).collect();
        let n = v.len();
        self.push(Op::Concat(parts.to_vec()), n, 1, v)
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, parts: &[NodeId]) -> Result<NodeId, KernelError> {
        if let Some(p) = parts.iter().find(|p| self.len_of(**p) != 1) {
            return Err(shape_err(format!(
                "sum expects scalars, got length {}",
                self.len_of(*p)
            )));
        }
        let v = parts.iter().map(|p| self.scalar(*p)).sum();
        Ok(self.push(Op::Sum(parts.to_vec()), 1, 1, vec![v]))
    }

    /// `−ln softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId, KernelError> {
        let n = self.len_of(logits);
        if target >= n {
            return Err(shape_err(format!("target class {target} of {n}")));
        }
        let probs = softmax(self.value(logits));
        let loss = -probs[target].max(S::min_positive_value()).ln();
        let id = self.push(Op::SoftmaxCrossEntropy(logits, target), 1, 1, vec![loss]);
        self.nodes[id.0].aux = probs;
        Ok(id)
    }

    /// `Σ |a_i − t_i|`.
    pub fn abs_error(&mut self, a: NodeId, target: Vec<S>) -> Result<NodeId, KernelError> {
        if self.len_of(a) != target.len() {
            return Err(shape_err("abs_error: target length".into()));
        }
        let v = self.value(a).iter().zip(&target).map(|(x, t)| (*x - *t).abs()).sum();
        Ok(self.push(Op::AbsError(a, target), 1, 1, vec![v]))
    }

    /// Mean of `(a_i − t_i)²`.
    pub fn squared_error(&mut self, a: NodeId, target: Vec<S>) -> Result<NodeId, KernelError> {
        let n = self.len_of(a);
        if n != target.len() || n == 0 {
            return Err(shape_err("squared_error: target length".into()));
        }
        let v = self
            .value(a)
            .iter()
            .zip(&target)
            .map(|(x, t)| (*x - *t) * (*x - *t))
            .sum::<S>()
            / S::from_usize_lossy(n);
        Ok(self.push(Op::SquaredError(a, target), 1, 1, vec![v]))
    }

    /// Accumulates `d loss / d θ` into `grads` for every parameter on the tape.
    pub fn backward(&self, loss: NodeId, grads: &mut Gradients<S>) -> Result<(), KernelError> {
        if self.len_of(loss) != 1 {
            return Err(shape_err("backward needs a scalar loss".into()));
        }
        if !self.scalar(loss).is_finite() {
            return Err(KernelError::NonFinite("loss".into()));
        }
        let mut adj: Vec<Vec<S>> = vec![Vec::new(); loss.0 + 1];
        adj[loss.0] = vec![S::one()];

        fn acc<S: Scalar>(adj: &mut [Vec<S>], id: NodeId, len: usize) -> &mut Vec<S> {
            let slot = &mut adj[id.0];
            if slot.is_empty() {
                *slot = vec![S::zero(); len];
            }
            slot
        }

        for idx in (0..=loss.0).rev() {
            if adj[idx].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut adj[idx]);
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => {
                    grads.slot(*p).iter_mut().zip(&g).for_each(|(d, v)| *d += *v);
                }
                Op::MatVec(m, x) => {
                    let (r, c) = self.shape(*m);
                    let mv = self.value(*m);
                    let xv = self.value(*x);
                    {
                        let dx = acc(&mut adj, *x, c);
                        for i in 0..r {
                            let gi = g[i];
                            if gi == S::zero() {
                                continue;
                            }
                            for (d, w) in dx.iter_mut().zip(&mv[i * c..(i + 1) * c]) {
                                *d += gi * *w;
                            }
                        }
                    }
                    let dm = acc(&mut adj, *m, r * c);
                    for i in 0..r {
                        let gi = g[i];
                        if gi == S::zero() {
                            continue;
                        }
                        for (d, xj) in dm[i * c..(i + 1) * c].iter_mut().zip(xv) {
                            *d += gi * *xj;
                        }
                    }
                }
                Op::Add(a, b) => {
                    let n = g.len();
                    acc(&mut adj, *a, n).iter_mut().zip(&g).for_each(|(d, v)| *d += *v);
                    acc(&mut adj, *b, n).iter_mut().zip(&g).for_each(|(d, v)| *d += *v);
                }
                Op::Sub(a, b) => {
                    let n = g.len();
                    acc(&mut adj, *a, n).iter_mut().zip(&g).for_each(|(d, v)| *d += *v);
                    acc(&mut adj, *b, n).iter_mut().zip(&g).for_each(|(d, v)| *d -= *v);
                }
                Op::Mul(a, b) => {
                    let n = g.len();
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    {
                        let da = acc(&mut adj, *a, n);
                        for i in 0..n {
                            da[i] += g[i] * bv[i];
                        }
                    }
                    let db = acc(&mut adj, *b, n);
                    for i in 0..n {
                        db[i] += g[i] * av[i];
                    }
                }
                Op::OneMinus(a) => {
                    acc(&mut adj, *a, g.len())
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(d, v)| *d -= *v);
                }
                Op::Scale(a, c) => {
                    acc(&mut adj, *a, g.len())
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(d, v)| *d += *v * *c);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let da = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        da[i] += g[i] * (S::one() - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let da = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        da[i] += g[i] * y[i] * (S::one() - y[i]);
                    }
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let da = acc(&mut adj, *a, g.len());
                    for i in 0..g.len() {
                        if x[i] > S::zero() {
                            da[i] += g[i];
                        }
                    }
                }
                Op::Row(m, index) => {
                    let (r, c) = self.shape(*m);
                    let dm = acc(&mut adj, *m, r * c);
                    for (d, v) in dm[index * c..(index + 1) * c].iter_mut().zip(&g) {
                        *d += *v;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.len_of(*p);
                        acc(&mut adj, *p, n)
                            .iter_mut()
                            .zip(&g[off..off + n])
                            .for_each(|(d, v)| *d += *v);
                        off += n;
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(&mut adj, *p, 1)[0] += g[0];
                    }
                }
                Op::SoftmaxCrossEntropy(logits, target) => {
                    let probs = &node.aux;
                    let dl = acc(&mut adj, *logits, probs.len());
                    for (i, p) in probs.iter().enumerate() {
                        let o = if i == *target { S::one() } else { S::zero() };
                        dl[i] += g[0] * (*p - o);
                    }
                }
                Op::AbsError(a, t) => {
                    let av = self.value(*a);
                    let da = acc(&mut adj, *a, t.len());
                    for i in 0..t.len() {
                        let diff = av[i] - t[i];
                        let sign = if diff > S::zero() {
                            S::one()
                        } else if diff < S::zero() {
                            -S::one()
                        } else {
                            S::zero()
                        };
                        da[i] += g[0] * sign;
                    }
                }
                Op::SquaredError(a, t) => {
                    let av = self.value(*a);
                    let n = S::from_usize_lossy(t.len());
                    let two = S::one() + S::one();
                    let da = acc(&mut adj, *a, t.len());
                    for i in 0..t.len() {
                        da[i] += g[0] * two * (av[i] - t[i]) / n;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|x| (*x - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
