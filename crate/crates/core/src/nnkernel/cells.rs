//! Vanilla RNN, LSTM and GRU cells.
//!
//! Cell maths is written once against [`Graph`]; the value-level step
//! functions build a throwaway graph and read the results back.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore, Tensor};
use super::KernelError;
use crate::encoding::FeatureMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Rnn,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(CellKind::Rnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(format!("unknown cell {other:?}")),
        }
    }
}

/// Hidden state of a cell; `c` is present for LSTM only.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState<S> {
    pub h: Vec<S>,
    pub c: Option<Vec<S>>,
}

impl<S: Scalar> CellState<S> {
    pub fn zeros(cell: &Cell) -> Self {
        let n = cell.hidden();
        CellState {
            h: vec![S::zero(); n],
            c: matches!(cell, Cell::Lstm(_)).then(|| vec![S::zero(); n]),
        }
    }
}

/// Cell state living on a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    pub h: NodeId,
    pub c: Option<NodeId>,
}

impl NodeState {
    pub fn constant<S: Scalar>(g: &mut Graph<'_, S>, state: &CellState<S>) -> Self {
        NodeState {
            h: g.constant(state.h.clone()),
            c: state.c.as_ref().map(|c| g.constant(c.clone())),
        }
    }

    pub fn read<S: Scalar>(&self, g: &Graph<'_, S>) -> CellState<S> {
        CellState {
            h: g.value(self.h).to_vec(),
            c: self.c.map(|c| g.value(c).to_vec()),
        }
    }
}

fn weight<S: Scalar, R: Rng>(
    store: &mut ParamStore<S>,
    name: String,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> ParamId {
    store.add(name, Tensor::glorot(rows, cols, rng))
}

fn bias<S: Scalar>(store: &mut ParamStore<S>, name: String, n: usize, v: f64) -> ParamId {
    store.add(name, Tensor::filled(n, 1, S::from_f64_lossy(v)))
}

/// Affine map `b + W·h + U·x`.
fn affine<S: Scalar>(
    g: &mut Graph<'_, S>,
    b: ParamId,
    w: ParamId,
    h: NodeId,
    u: ParamId,
    x: NodeId,
) -> Result<NodeId, KernelError> {
    let (bn, wn, un) = (g.param(b), g.param(w), g.param(u));
    let wh = g.matvec(wn, h)?;
    let ux = g.matvec(un, x)?;
    let s = g.add(wh, ux)?;
    g.add(bn, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnCell {
    pub input: usize,
    pub hidden: usize,
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    /// Optional output projection `(V, c)`.
    pub output: Option<(ParamId, ParamId)>,
}

impl RnnCell {
    pub fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let w = weight(store, format!("{prefix}.W"), hidden, hidden, rng);
        let u = weight(store, format!("{prefix}.U"), hidden, input, rng);
        let b = bias(store, format!("{prefix}.b"), hidden, 0.0);
        let output = output.map(|k| {
            (
                weight(store, format!("{prefix}.V"), k, hidden, rng),
                bias(store, format!("{prefix}.c"), k, 0.0),
            )
        });
        RnnCell {
            input,
            hidden,
            w,
            u,
            b,
            output,
        }
    }

    /// Returns `(h_t, o_t)`.
    pub fn step_graph<S: Scalar>(
        &self,
        g: &mut Graph<'_, S>,
        x: NodeId,
        h_prev: NodeId,
    ) -> Result<(NodeId, Option<NodeId>), KernelError> {
        let a = affine(g, self.b, self.w, h_prev, self.u, x)?;
        let h = g.tanh(a);
        let o = match self.output {
            Some((v, c)) => {
                let (vn, cn) = (g.param(v), g.param(c));
                let vh = g.matvec(vn, h)?;
                Some(g.add(cn, vh)?)
            }
            None => None,
        };
        Ok((h, o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub u: ParamId,
    pub w: ParamId,
    pub b: ParamId,
}

impl Gate {
    fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        gate: &str,
        input: usize,
        hidden: usize,
        bias_init: f64,
        rng: &mut R,
    ) -> Self {
        Gate {
            u: weight(store, format!("{prefix}.U_{gate}"), hidden, input, rng),
            w: weight(store, format!("{prefix}.W_{gate}"), hidden, hidden, rng),
            b: bias(store, format!("{prefix}.b_{gate}"), hidden, bias_init),
        }
    }

    fn pre<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId, h: NodeId) -> Result<NodeId, KernelError> {
        affine(g, self.b, self.w, h, self.u, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input: usize,
    pub hidden: usize,
    pub forget: Gate,
    pub input_gate: Gate,
    pub output_gate: Gate,
    pub candidate: Gate,
}

/// Graph nodes of one LSTM step, gates included.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub h: NodeId,
    pub c: NodeId,
    pub f: NodeId,
    pub i: NodeId,
    pub o: NodeId,
    pub c_tilde: NodeId,
}

impl LstmCell {
    /// The forget-gate bias starts at +1.
    pub fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        LstmCell {
            input,
            hidden,
            forget: Gate::new(store, prefix, "f", input, hidden, 1.0, rng),
            input_gate: Gate::new(store, prefix, "i", input, hidden, 0.0, rng),
            output_gate: Gate::new(store, prefix, "o", input, hidden, 0.0, rng),
            candidate: Gate::new(store, prefix, "C", input, hidden, 0.0, rng),
        }
    }

    pub fn step_graph<S: Scalar>(
        &self,
        g: &mut Graph<'_, S>,
        x: NodeId,
        h_prev: NodeId,
        c_prev: NodeId,
    ) -> Result<LstmNodes, KernelError> {
        let fp = self.forget.pre(g, x, h_prev)?;
        let f = g.sigmoid(fp);
        let ip = self.input_gate.pre(g, x, h_prev)?;
        let i = g.sigmoid(ip);
        let op = self.output_gate.pre(g, x, h_prev)?;
        let o = g.sigmoid(op);
        let cp = self.candidate.pre(g, x, h_prev)?;
        let c_tilde = g.tanh(cp);
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, c_tilde)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok(LstmNodes { h, c, f, i, o, c_tilde })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
    pub update: GruGate,
    pub reset: GruGate,
    /// Candidate weights with their own bias `b_h`.
    pub candidate: GruGate,
}

/// `W` acts on the input, `U` on the (possibly reset) hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruGate {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl GruGate {
    fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        gate: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        GruGate {
            w: weight(store, format!("{prefix}.W_{gate}"), hidden, input, rng),
            u: weight(store, format!("{prefix}.U_{gate}"), hidden, hidden, rng),
            b: bias(store, format!("{prefix}.b_{gate}"), hidden, 0.0),
        }
    }

    fn pre<S: Scalar>(&self, g: &mut Graph<'_, S>, x: NodeId, h: NodeId) -> Result<NodeId, KernelError> {
        affine(g, self.b, self.u, h, self.w, x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GruNodes {
    pub h: NodeId,
    pub z: NodeId,
    pub r: NodeId,
    pub h_tilde: NodeId,
}

impl GruCell {
    pub fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        GruCell {
            input,
            hidden,
            update: GruGate::new(store, prefix, "z", input, hidden, rng),
            reset: GruGate::new(store, prefix, "r", input, hidden, rng),
            candidate: GruGate::new(store, prefix, "h", input, hidden, rng),
        }
    }

    pub fn step_graph<S: Scalar>(
        &self,
        g: &mut Graph<'_, S>,
        x: NodeId,
        h_prev: NodeId,
    ) -> Result<GruNodes, KernelError> {
        let zp = self.update.pre(g, x, h_prev)?;
        let z = g.sigmoid(zp);
        let rp = self.reset.pre(g, x, h_prev)?;
        let r = g.sigmoid(rp);
        let rh = g.mul(r, h_prev)?;
        let hp = self.candidate.pre(g, x, rh)?;
        let h_tilde = g.tanh(hp);
        let keep = g.mul(z, h_prev)?;
        let one_minus_z = g.one_minus(z);
        let write = g.mul(one_minus_z, h_tilde)?;
        let h = g.add(keep, write)?;
        Ok(GruNodes { h, z, r, h_tilde })
    }
}

/// Any of the three recurrent cells.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Rnn(RnnCell),
    Lstm(LstmCell),
    Gru(GruCell),
}

impl Cell {
    pub fn new<S: Scalar, R: Rng>(
        kind: CellKind,
        store: &mut ParamStore<S>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        match kind {
            CellKind::Rnn => Cell::Rnn(RnnCell::new(store, prefix, input, hidden, None, rng)),
            CellKind::Lstm => Cell::Lstm(LstmCell::new(store, prefix, input, hidden, rng)),
            CellKind::Gru => Cell::Gru(GruCell::new(store, prefix, input, hidden, rng)),
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            Cell::Rnn(_) => CellKind::Rnn,
            Cell::Lstm(_) => CellKind::Lstm,
            Cell::Gru(_) => CellKind::Gru,
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Cell::Rnn(c) => c.input,
            Cell::Lstm(c) => c.input,
            Cell::Gru(c) => c.input,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Cell::Rnn(c) => c.hidden,
            Cell::Lstm(c) => c.hidden,
            Cell::Gru(c) => c.hidden,
        }
    }

    pub fn step_graph<S: Scalar>(
        &self,
        g: &mut Graph<'_, S>,
        x: NodeId,
        prev: NodeState,
    ) -> Result<NodeState, KernelError> {
        match self {
            Cell::Rnn(c) => Ok(NodeState {
                h: c.step_graph(g, x, prev.h)?.0,
                c: None,
            }),
            Cell::Lstm(cell) => {
                let c_prev = prev
                    .c
                    .ok_or_else(|| KernelError::Shape("LSTM step needs a cell vector".into()))?;
                let n = cell.step_graph(g, x, prev.h, c_prev)?;
                Ok(NodeState { h: n.h, c: Some(n.c) })
            }
            Cell::Gru(c) => Ok(NodeState {
                h: c.step_graph(g, x, prev.h)?.h,
                c: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnStep<S> {
    pub h: Vec<S>,
    pub o: Option<Vec<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep<S> {
    pub state: CellState<S>,
    pub f: Vec<S>,
    pub i: Vec<S>,
    pub o: Vec<S>,
    pub c_tilde: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruStep<S> {
    pub h: Vec<S>,
    pub z: Vec<S>,
    pub r: Vec<S>,
    pub h_tilde: Vec<S>,
}

pub fn rnn_step<S: Scalar>(
    store: &ParamStore<S>,
    cell: &RnnCell,
    x: &[S],
    h_prev: &[S],
) -> Result<RnnStep<S>, KernelError> {
    let mut g = Graph::new(store);
    let xn = g.constant(x.to_vec());
    let hn = g.constant(h_prev.to_vec());
    let (h, o) = cell.step_graph(&mut g, xn, hn)?;
    Ok(RnnStep {
        h: g.value(h).to_vec(),
        o: o.map(|o| g.value(o).to_vec()),
    })
}

pub fn lstm_step<S: Scalar>(
    store: &ParamStore<S>,
    cell: &LstmCell,
    x: &[S],
    prev: &CellState<S>,
) -> Result<LstmStep<S>, KernelError> {
    let c_prev = prev
        .c
        .as_ref()
        .ok_or_else(|| KernelError::Shape("LSTM step needs a cell vector".into()))?;
    let mut g = Graph::new(store);
    let xn = g.constant(x.to_vec());
    let hn = g.constant(prev.h.clone());
    let cn = g.constant(c_prev.clone());
    let n = cell.step_graph(&mut g, xn, hn, cn)?;
    let read = |id| g.value(id).to_vec();
    Ok(LstmStep {
        state: CellState {
            h: read(n.h),
            c: Some(read(n.c)),
        },
        f: read(n.f),
        i: read(n.i),
        o: read(n.o),
        c_tilde: read(n.c_tilde),
    })
}

pub fn gru_step<S: Scalar>(
    store: &ParamStore<S>,
    cell: &GruCell,
    x: &[S],
    h_prev: &[S],
) -> Result<GruStep<S>, KernelError> {
    let mut g = Graph::new(store);
    let xn = g.constant(x.to_vec());
    let hn = g.constant(h_prev.to_vec());
    let n = cell.step_graph(&mut g, xn, hn)?;
    let read = |id| g.value(id).to_vec();
    Ok(GruStep {
        h: read(n.h),
        z: read(n.z),
        r: read(n.r),
        h_tilde: read(n.h_tilde),
    })
}

fn check_left_padding(mask: &[bool]) -> Result<(), KernelError> {
    let mut seen_real = false;
    for (i, m) in mask.iter().enumerate() {
        if *m {
            seen_real = true;
        } else if seen_real {
            return Err(KernelError::InterleavedPadding(i));
        }
    }
    Ok(())
}

/// Runs `cell` over `inputs`, one state per row. Padding rows (mask false)
/// must come first and pass the state through unchanged.
pub fn forward_sequence<S: Scalar>(
    g: &mut Graph<'_, S>,
    cell: &Cell,
    inputs: &[NodeId],
    mask: &[bool],
    init: NodeState,
) -> Result<Vec<NodeState>, KernelError> {
    if inputs.len() != mask.len() {
        return Err(KernelError::Shape(format!(
            "{} inputs, {} mask entries",
            inputs.len(),
            mask.len()
        )));
    }
    check_left_padding(mask)?;
    let mut state = init;
    let mut out = Vec::with_capacity(inputs.len());
    for (x, real) in inputs.iter().zip(mask) {
        if *real {
            state = cell.step_graph(g, *x, state)?;
        }
        out.push(state);
    }
    Ok(out)
}

/// Value-level [`forward_sequence`] over an encoded prefix, starting from
/// the zero state.
pub fn forward_sequence_values<S: Scalar>(
    store: &ParamStore<S>,
    cell: &Cell,
    inputs: &FeatureMatrix,
) -> Result<Vec<CellState<S>>, KernelError> {
    let mut g = Graph::new(store);
    let xs: Vec<NodeId> = (0..inputs.rows)
        .map(|r| g.constant(inputs.row(r).iter().map(|v| S::from_f64_lossy(*v)).collect()))
        .collect();
    let init = NodeState::constant(&mut g, &CellState::zeros(cell));
    let states = forward_sequence(&mut g, cell, &xs, &inputs.mask, init)?;
    Ok(states.iter().map(|s| s.read(&g)).collect())
}
