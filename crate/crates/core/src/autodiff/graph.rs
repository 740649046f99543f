use std::collections::HashMap;

use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inputs to `log` are clamped here before evaluation.
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    /// Matrix plus a 1×c row broadcast over every row.
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Neg(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Log(NodeId),
    Sqrt(NodeId),
    RowSoftmax(NodeId),
    /// Column totals, r×c → 1×c.
    SumRows(NodeId),
    SumAll(NodeId),
    Mean(NodeId),
    /// Squared Frobenius norm, r×c → 1×1.
    SumSquares(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    GatherRows(NodeId, Vec<usize>),
    /// Multiplies row i of the first input by entry i of an r×1 column.
    RowScale(NodeId, NodeId),
}

impl<T> Op<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Neg(..) => "neg",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Log(..) => "log",
            Op::Sqrt(..) => "sqrt",
            Op::RowSoftmax(..) => "row_softmax",
            Op::SumRows(..) => "sum_rows",
            Op::SumAll(..) => "sum_all",
            Op::Mean(..) => "mean",
            Op::SumSquares(..) => "sum_squares",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::RowScale(..) => "row_scale",
        }
    }

    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) | Op::RowScale(a, b) => vec![*a, *b],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Neg(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Log(a)
            | Op::Sqrt(a)
            | Op::RowSoftmax(a)
            | Op::SumRows(a)
            | Op::SumAll(a)
            | Op::Mean(a)
            | Op::SumSquares(a)
            | Op::SliceCols(a, ..)
            | Op::GatherRows(a, _) => vec![*a],
            Op::ConcatCols(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub op: Op<T>,
    pub value: Matrix<T>,
    pub grad: Option<Matrix<T>>,
    requires_grad: bool,
}

impl<T> Node<T> {
    pub fn inputs(&self) -> Vec<NodeId> {
        self.op.inputs()
    }
}

/// Define-by-run computation graph.
///
/// Values are computed eagerly when a node is added, so node ids are already
/// in topological order. A graph is built once per batch and then discarded.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<String, NodeId>,
    param_order: Vec<String>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
            param_order: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id.0]
    }

    /// Forward value of `id`.
    pub fn value(&self, id: NodeId) -> &Matrix<T> {
        &self.nodes[id.0].value
    }

    pub fn forward(&self, id: NodeId) -> &Matrix<T> {
        self.value(id)
    }

    pub fn grad(&self, id: NodeId) -> Option<&Matrix<T>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, op: Op<T>, value: Matrix<T>) -> NodeId {
        let requires_grad = op.inputs().iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            grad: None,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf that participates in differentiation.
    pub fn variable(&mut self, value: Matrix<T>) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            grad: None,
            requires_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf treated as a constant by [`Graph::backward`].
    pub fn constant(&mut self, value: Matrix<T>) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            grad: None,
            requires_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Binds a stored parameter as a leaf. Binding the same name twice returns the same node.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.params.get(name) {
            return Ok(id);
        }
        let p = store
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))?;
        let id = if p.trainable {
            self.variable(p.value.clone())
        } else {
            self.constant(p.value.clone())
        };
        self.params.insert(name.to_string(), id);
        self.param_order.push(name.to_string());
        Ok(id)
    }

    pub fn param_id(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    /// Names of all parameters bound in this graph, in binding order.
    pub fn bound_params(&self) -> &[String] {
        &self.param_order
    }

    fn shape_err(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Error {
        Error::Shape { op, lhs, rhs }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Self::shape_err("add", sa, sb));
        }
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(Self::shape_err("add_row", sa, sr));
        }
        let mut v = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for i in 0..sa.0 {
            for (x, &y) in v.row_mut(i).iter_mut().zip(&r) {
                *x += y;
            }
        }
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Self::shape_err("mul", sa, sb));
        }
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, s: T) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| -x);
        self.push(Op::Neg(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(T::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(Op::Relu(a), v)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let lo = T::lit(LOG_CLAMP);
        let v = self.value(a).map(|x| x.max(lo).ln());
        self.push(Op::Log(a), v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(T::zero()).sqrt());
        self.push(Op::Sqrt(a), v)
    }

    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let v = row_softmax(self.value(a));
        self.push(Op::RowSoftmax(a), v)
    }

    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut v = Matrix::zeros(1, x.cols());
        for i in 0..x.rows() {
            for (o, &y) in v.data_mut().iter_mut().zip(x.row(i)) {
                *o += y;
            }
        }
        self.push(Op::SumRows(a), v)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v)
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Self::shape_err("mean", x.shape(), (1, 1)));
        }
        let v = Matrix::scalar(x.sum() / T::lit(x.len() as f64));
        Ok(self.push(Op::Mean(a), v))
    }

    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::scalar(self.value(a).sum_squares());
        self.push(Op::SumSquares(a), v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of zero inputs".into()))?;
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Self::shape_err("concat_cols", self.shape(first), self.shape(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let v = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let s = self.shape(a);
        if start >= end || end > s.1 {
            return Err(Self::shape_err("slice_cols", s, (start, end)));
        }
        let x = self.value(a);
        let v = Matrix::from_fn(s.0, end - start, |i, j| x[(i, start + j)]);
        Ok(self.push(Op::SliceCols(a, start, end), v))
    }

    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let s = self.shape(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= s.0) {
            return Err(Self::shape_err("gather_rows", s, (bad, 0)));
        }
        let x = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * s.1);
        for &i in ids {
            data.extend_from_slice(x.row(i));
        }
        let v = Matrix::from_vec(ids.len(), s.1, data)?;
        Ok(self.push(Op::GatherRows(table, ids.to_vec()), v))
    }

    pub fn row_scale(&mut self, a: NodeId, col: NodeId) -> Result<NodeId> {
        let (sa, sc) = (self.shape(a), self.shape(col));
        if sc != (sa.0, 1) {
            return Err(Self::shape_err("row_scale", sa, sc));
        }
        let c = self.value(col).data().to_vec();
        let mut v = self.value(a).clone();
        for (i, &w) in c.iter().enumerate() {
            for x in v.row_mut(i) {
                *x *= w;
            }
        }
        Ok(self.push(Op::RowScale(a, col), v))
    }

    /// Affine map `x·w + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    /// Reverse-mode sweep from a 1×1 output.
    ///
    /// Afterwards every node that depends on a variable carries a gradient;
    /// variables the output does not reach get a zero gradient.
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        let shape = self.shape(output);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 output, got {}x{}",
                shape.0, shape.1
            )));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::scalar(T::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if let Op::GatherRows(t, ids) = &node.op {
                // scatter-add into one table-sized buffer shared by all gathers
                let t = *t;
                if self.nodes[t.0].requires_grad {
                    let (r, c) = self.nodes[t.0].value.shape();
                    let acc = grads[t.0].get_or_insert_with(|| Matrix::zeros(r, c));
                    for (row, &id) in ids.iter().enumerate() {
                        for (o, &x) in acc.row_mut(id).iter_mut().zip(g.row(row)) {
                            *o += x;
                        }
                    }
                }
                self.nodes[idx].grad = Some(g);
                continue;
            }
            for (input, contrib) in self.local_grads(idx, &g)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
            self.nodes[idx].grad = Some(g);
        }
        for n in &mut self.nodes {
            if n.requires_grad && n.grad.is_none() && matches!(n.op, Op::Leaf) {
                n.grad = Some(Matrix::zeros(n.value.rows(), n.value.cols()));
            }
        }
        Ok(())
    }

    /// Gradient contributions of node `idx` to each of its inputs, given its output gradient.
    fn local_grads(&self, idx: usize, g: &Matrix<T>) -> Result<Vec<(NodeId, Matrix<T>)>> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let val = |id: NodeId| &self.nodes[id.0].value;
        let wants = |id: NodeId| self.nodes[id.0].requires_grad;
        let mut res = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    res.push((*a, g.matmul_nt(val(*b))?));
                }
                if wants(*b) {
                    res.push((*b, val(*a).matmul_tn(g)?));
                }
            }
            Op::Transpose(a) => res.push((*a, g.transpose())),
            Op::Add(a, b) => {
                res.push((*a, g.clone()));
                res.push((*b, g.clone()));
            }
            Op::AddRow(a, r) => {
                if wants(*r) {
                    let mut rg = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, &x) in rg.data_mut().iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                    res.push((*r, rg));
                }
                res.push((*a, g.clone()));
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    res.push((*a, g.zip_map(val(*b), |x, y| x * y)));
                }
                if wants(*b) {
                    res.push((*b, g.zip_map(val(*a), |x, y| x * y)));
                }
            }
            Op::Scale(a, s) => {
                let s = *s;
                res.push((*a, g.map(|x| x * s)));
            }
            Op::Neg(a) => res.push((*a, g.map(|x| -x))),
            Op::Sigmoid(a) => res.push((*a, g.zip_map(out, |x, y| x * y * (T::one() - y)))),
            Op::Tanh(a) => res.push((*a, g.zip_map(out, |x, y| x * (T::one() - y * y)))),
            Op::Relu(a) => res.push((*a, g.zip_map(val(*a), |x, y| if y > T::zero() { x } else { T::zero() }))),
            Op::Log(a) => {
                let lo = T::lit(LOG_CLAMP);
                res.push((*a, g.zip_map(val(*a), |x, y| if y > lo { x / y } else { T::zero() })));
            }
            Op::Sqrt(a) => {
                let two = T::lit(2.0);
                res.push((*a, g.zip_map(out, |x, y| if y > T::zero() { x / (two * y) } else { T::zero() })));
            }
            Op::RowSoftmax(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let (p, gr) = (out.row(i), g.row(i));
                    let dot: T = p.iter().zip(gr).map(|(&p, &g)| p * g).sum();
                    for ((o, &p), &g) in ga.row_mut(i).iter_mut().zip(p).zip(gr) {
                        *o = p * (g - dot);
                    }
                }
                res.push((*a, ga));
            }
            Op::SumRows(a) => {
                let s = val(*a).shape();
                res.push((*a, Matrix::from_fn(s.0, s.1, |_, j| g[(0, j)])));
            }
            Op::SumAll(a) => {
                let s = val(*a).shape();
                res.push((*a, Matrix::filled(s.0, s.1, g.item())));
            }
            Op::Mean(a) => {
                let x = val(*a);
                let w = g.item() / T::lit(x.len() as f64);
                res.push((*a, Matrix::filled(x.rows(), x.cols(), w)));
            }
            Op::SumSquares(a) => {
                let two = T::lit(2.0) * g.item();
                res.push((*a, val(*a).map(|x| two * x)));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = val(p).cols();
                    if wants(p) {
                        let o = offset;
                        res.push((p, Matrix::from_fn(g.rows(), c, |i, j| g[(i, o + j)])));
                    }
                    offset += c;
                }
            }
            Op::SliceCols(a, start, _) => {
                let s = val(*a).shape();
                let mut ga = Matrix::zeros(s.0, s.1);
                for i in 0..g.rows() {
                    ga.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                }
                res.push((*a, ga));
            }
            // accumulated directly in `backward`
            Op::GatherRows(..) => {}
            Op::RowScale(a, c) => {
                let (av, cv) = (val(*a), val(*c));
                if wants(*a) {
                    let mut ga = g.clone();
                    for i in 0..ga.rows() {
                        let w = cv[(i, 0)];
                        for x in ga.row_mut(i) {
                            *x *= w;
                        }
                    }
                    res.push((*a, ga));
                }
                if wants(*c) {
                    let gc = Matrix::from_fn(cv.rows(), 1, |i, _| {
                        g.row(i).iter().zip(av.row(i)).map(|(&x, &y)| x * y).sum()
                    });
                    res.push((*c, gc));
                }
            }
        }
        Ok(res)
    }

    /// Gradients of every bound trainable parameter, keyed by name.
    ///
    /// Call after [`Graph::backward`]. Unreached parameters get zeros.
    pub fn param_grads(&self) -> Vec<(String, Matrix<T>)> {
        self.param_order
            .iter()
            .filter_map(|name| {
                let node = &self.nodes[self.params[name].0];
                node.requires_grad.then(|| {
                    let g = node
                        .grad
                        .clone()
                        .unwrap_or_else(|| Matrix::zeros(node.value.rows(), node.value.cols()));
                    (name.clone(), g)
                })
            })
            .collect()
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax of each row.
pub fn row_softmax<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let mut v = x.clone();
    for i in 0..v.rows() {
        let row = v.row_mut(i);
        let max = row.iter().fold(T::neg_infinity(), |m, &y| m.max(y));
        let mut total = T::zero();
        for y in row.iter_mut() {
            *y = (*y - max).exp();
            total += *y;
        }
        for y in row.iter_mut() {
            *y /= total;
        }
    }
    v
}
