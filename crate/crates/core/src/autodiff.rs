//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every primitive in evaluation order. Backward passes
//! are themselves recorded on the same tape as ordinary primitives, so the
//! gradient of a gradient is available: Hessian-vector products and mixed
//! second partials are gradients of an inner product with a first-order
//! gradient (double backward).
//!
//! Binary elementwise primitives require equal shapes. Broadcasting is
//! explicit: a scalar can be expanded to any shape, a `1 x c` row to `r x c`
//! (and an `r x 1` column to `r x c`, used by the row-wise log-sum-exp).
//!
//! ```
//! use lossforge::autodiff::Tape;
//! use lossforge::tensor::Tensor;
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = x * x;
//! assert_eq!(tape.value_of(y).unwrap(), 9.0);
//! let g = tape.grad(y, &[x]).unwrap();
//! assert_eq!(g.get(x).unwrap().item(), 6.0);
//! ```

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Exp(usize),
    Log(usize),
    Recip(usize),
    Sigmoid(usize),
    Relu(usize),
    Abs(usize),
    MatMul(usize, usize),
    Transpose(usize),
    SumAll(usize),
    SumRows(usize),
    SumCols(usize),
    ExpandScalar(usize),
    ExpandRows(usize),
    ExpandCols(usize),
    Reshape(usize),
    Slice(usize, usize),
    Pad(usize, usize),
    Take(usize, Rc<[usize]>),
    ScatterAdd(usize, Rc<[usize]>),
    MaxCols(usize, Rc<[usize]>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Const => "const",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Recip(..) => "recip",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::Abs(..) => "abs",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::SumAll(..) => "sum",
            Op::SumRows(..) => "sum_rows",
            Op::SumCols(..) => "sum_cols",
            Op::ExpandScalar(..) => "expand_scalar",
            Op::ExpandRows(..) => "expand_rows",
            Op::ExpandCols(..) => "expand_cols",
            Op::Reshape(..) => "reshape",
            Op::Slice(..) => "slice",
            Op::Pad(..) => "pad",
            Op::Take(..) => "take",
            Op::ScatterAdd(..) => "scatter_add",
            Op::MaxCols(..) => "max_cols",
        }
    }
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Record of primitive operations in topological (evaluation) order.
///
/// Single-threaded by construction; independent tapes can live on
/// independent threads.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    first_nonfinite: Cell<Option<usize>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{} {:?})", self.id, self.shape())
    }
}

/// Gradients keyed by leaf.
#[derive(Clone, Debug)]
pub struct GradBundle {
    entries: Vec<(usize, Tensor)>,
}

impl GradBundle {
    pub fn get(&self, leaf: Var<'_>) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(id, _)| *id == leaf.id)
            .map(|(_, t)| t)
    }

    /// Gradients in the order the leaves were requested.
    pub fn into_tensors(self) -> Vec<Tensor> {
        self.entries.into_iter().map(|(_, t)| t).collect()
    }
}

/// Position on a tape that [`Tape::rewind`] can return to.
#[derive(Clone, Copy, Debug)]
pub struct Mark(usize);

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(256)),
            first_nonfinite: Cell::new(None),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Const, false)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(Tensor::scalar(v))
    }

    pub fn mark(&self) -> Mark {
        Mark(self.len())
    }

    /// Drops every node recorded after `mark`. Vars created after the mark
    /// must not be used afterwards.
    pub fn rewind(&self, mark: Mark) {
        self.nodes.borrow_mut().truncate(mark.0);
        if let Some(i) = self.first_nonfinite.get() {
            if i >= mark.0 {
                self.first_nonfinite.set(None);
            }
        }
    }

    /// `Err(Numerical)` naming the first op that produced NaN/Inf, if any.
    pub fn check(&self) -> Result<()> {
        match self.first_nonfinite.get() {
            None => Ok(()),
            Some(i) => Err(Error::Numerical {
                op_index: i,
                op: self.nodes.borrow()[i].op.name(),
            }),
        }
    }

    /// Scalar value of `root` after checking the whole tape for non-finite values.
    pub fn value_of(&self, root: Var<'_>) -> Result<f64> {
        self.owns(root)?;
        self.check()?;
        let v = root.value();
        if v.len() != 1 {
            return Err(Error::Shape(format!(
                "expected a scalar, got shape {:?}",
                v.shape()
            )));
        }
        Ok(v.item())
    }

    fn owns(&self, v: Var<'_>) -> Result<()> {
        if std::ptr::eq(v.tape, self) && v.id < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownLeaf)
        }
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        if self.first_nonfinite.get().is_none() && !value.all_finite() {
            self.first_nonfinite.set(Some(id));
        }
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var { tape: self, id }
    }

    fn value_rc(&self, id: usize) -> Rc<Tensor> {
        self.nodes.borrow()[id].value.clone()
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn unary(&self, a: usize, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'_> {
        let av = self.value_rc(a);
        let out = f(&av);
        self.push(out, op, self.requires(a))
    }

    fn binary(
        &self,
        a: usize,
        b: usize,
        op: Op,
        f: impl FnOnce(&Tensor, &Tensor) -> Tensor,
    ) -> Var<'_> {
        let av = self.value_rc(a);
        let bv = self.value_rc(b);
        let out = f(&av, &bv);
        let rg = self.requires(a) || self.requires(b);
        self.push(out, op, rg)
    }

    /// Gradients of the scalar `root` with respect to `leaves`, recorded on
    /// the tape so that they can be differentiated again.
    pub fn grad_graph<'t>(&'t self, root: Var<'t>, leaves: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        self.owns(root)?;
        for l in leaves {
            self.owns(*l)?;
        }
        if root.value().len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got shape {:?}",
                root.shape()
            )));
        }
        let n = root.id + 1;
        let mut grads: Vec<Option<Var<'t>>> = vec![None; n];
        grads[root.id] = Some(self.constant(Tensor::full(root.value().shape(), 1.0)));
        for id in (0..n).rev() {
            let Some(g) = grads[id] else { continue };
            let (op, rg) = {
                let nodes = self.nodes.borrow();
                (nodes[id].op.clone(), nodes[id].requires_grad)
            };
            if !rg {
                continue;
            }
            self.backprop(id, &op, g, &mut grads);
        }
        Ok(leaves
            .iter()
            .map(|l| match grads.get(l.id).copied().flatten() {
                Some(g) => g,
                None => self.constant(Tensor::zeros(l.value().shape())),
            })
            .collect())
    }

    /// Gradients of the scalar `root` as plain tensors.
    pub fn grad<'t>(&'t self, root: Var<'t>, leaves: &[Var<'t>]) -> Result<GradBundle> {
        let gs = self.grad_graph(root, leaves)?;
        self.check()?;
        Ok(GradBundle {
            entries: leaves
                .iter()
                .zip(gs)
                .map(|(l, g)| (l.id, g.value().as_ref().clone()))
                .collect(),
        })
    }

    fn backprop<'t>(&'t self, id: usize, op: &Op, g: Var<'t>, grads: &mut [Option<Var<'t>>]) {
        let var = |i: usize| Var { tape: self, id: i };
        let out = var(id);
        let mut acc = |i: usize, d: Var<'t>| {
            if !self.requires(i) {
                return;
            }
            grads[i] = Some(match grads[i] {
                Some(prev) => prev + d,
                None => d,
            });
        };
        match *op {
            Op::Leaf | Op::Const => {}
            Op::Add(a, b) => {
                acc(a, g);
                acc(b, g);
            }
            Op::Sub(a, b) => {
                acc(a, g);
                if self.requires(b) {
                    acc(b, -g);
                }
            }
            Op::Mul(a, b) => {
                if self.requires(a) {
                    acc(a, g * var(b));
                }
                if self.requires(b) {
                    acc(b, g * var(a));
                }
            }
            Op::Neg(a) => acc(a, -g),
            Op::Scale(a, c) => acc(a, g.scale(c)),
            Op::AddScalar(a) => acc(a, g),
            Op::Exp(a) => acc(a, g * out),
            Op::Log(a) => acc(a, g * var(a).recip()),
            Op::Recip(a) => acc(a, -(g * out * out)),
            Op::Sigmoid(a) => {
                let one_minus = (-out).add_scalar(1.0);
                acc(a, g * out * one_minus)
            }
            Op::Relu(a) => {
                let mask = self.constant(var(a).value().map(|x| if x > 0.0 { 1.0 } else { 0.0 }));
                acc(a, g * mask)
            }
            Op::Abs(a) => {
                let sign = self.constant(var(a).value().map(|x| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }));
                acc(a, g * sign)
            }
            Op::MatMul(a, b) => {
                if self.requires(a) {
                    acc(a, g.matmul(var(b).t()));
                }
                if self.requires(b) {
                    acc(b, var(a).t().matmul(g));
                }
            }
            Op::Transpose(a) => acc(a, g.t()),
            Op::SumAll(a) => {
                let shape = var(a).shape();
                acc(a, g.expand_scalar(&shape))
            }
            Op::SumRows(a) => {
                let (r, _) = var(a).value().dims2();
                acc(a, g.expand_rows(r))
            }
            Op::SumCols(a) => {
                let (_, c) = var(a).value().dims2();
                acc(a, g.expand_cols(c))
            }
            Op::ExpandScalar(a) => {
                let shape = var(a).shape();
                acc(a, g.sum().reshape(&shape))
            }
            Op::ExpandRows(a) => acc(a, g.sum_rows()),
            Op::ExpandCols(a) => acc(a, g.sum_cols()),
            Op::Reshape(a) => {
                let shape = var(a).shape();
                acc(a, g.reshape(&shape))
            }
            Op::Slice(a, start) => {
                let total = var(a).value().len();
                acc(a, g.pad(start, total))
            }
            Op::Pad(a, start) => {
                let len = var(a).value().len();
                acc(a, g.slice(start, len))
            }
            Op::Take(a, ref idx) => {
                let av = var(a);
                let shape = av.shape();
                let flat = g.reshape(&[idx.len()]).scatter_add(idx.clone(), av.value().len());
                acc(a, flat.reshape(&shape))
            }
            Op::ScatterAdd(a, ref idx) => {
                let shape = var(a).shape();
                acc(a, g.take(idx.clone()).reshape(&shape))
            }
            Op::MaxCols(a, ref flat_idx) => {
                let av = var(a);
                let shape = av.shape();
                let r = flat_idx.len();
                let spread = g
                    .reshape(&[r])
                    .scatter_add(flat_idx.clone(), av.value().len());
                acc(a, spread.reshape(&shape))
            }
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_rc(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn item(&self) -> f64 {
        self.value().item()
    }

    /// Same value, cut from the graph.
    pub fn detach(self) -> Var<'t> {
        let v = self.value().as_ref().clone();
        self.tape.constant(v)
    }

    fn same_shape(self, other: Var<'t>, what: &str) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "{what}: operands live on different tapes"
        );
        let (a, b) = (self.value(), other.value());
        assert_eq!(a.shape(), b.shape(), "{what}: shape mismatch");
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Scale(self.id, c), |a| a.map(|x| c * x))
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        self.tape
            .unary(self.id, Op::AddScalar(self.id), |a| a.map(|x| x + c))
    }

    pub fn exp(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Exp(self.id), |a| a.map(f64::exp))
    }

    pub fn ln(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Log(self.id), |a| a.map(f64::ln))
    }

    pub fn recip(self) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Recip(self.id), |a| a.map(|x| 1.0 / x))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Sigmoid(self.id), |a| a.map(sigmoid))
    }

    pub fn relu(self) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Relu(self.id), |a| a.map(|x| x.max(0.0)))
    }

    pub fn abs(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Abs(self.id), |a| a.map(f64::abs))
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.id, other.id, Op::MatMul(self.id, other.id), |a, b| {
                a.matmul(b)
            })
    }

    pub fn t(self) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Transpose(self.id), Tensor::transpose)
    }

    pub fn sum(self) -> Var<'t> {
        self.tape.unary(self.id, Op::SumAll(self.id), |a| {
            Tensor::scalar(a.data().iter().sum())
        })
    }

    /// `r x c -> 1 x c`.
    pub fn sum_rows(self) -> Var<'t> {
        self.tape.unary(self.id, Op::SumRows(self.id), |a| {
            let (r, c) = a.dims2();
            let mut out = vec![0.0; c];
            for i in 0..r {
                for (o, x) in out.iter_mut().zip(a.row(i)) {
                    *o += x;
                }
            }
            Tensor::matrix(1, c, out)
        })
    }

    /// `r x c -> r x 1`.
    pub fn sum_cols(self) -> Var<'t> {
        self.tape.unary(self.id, Op::SumCols(self.id), |a| {
            let (r, _) = a.dims2();
            Tensor::matrix(r, 1, (0..r).map(|i| a.row(i).iter().sum()).collect())
        })
    }

    /// Single-element tensor repeated into `shape`.
    pub fn expand_scalar(self, shape: &[usize]) -> Var<'t> {
        let shape = shape.to_vec();
        self.tape.unary(self.id, Op::ExpandScalar(self.id), |a| {
            assert_eq!(a.len(), 1, "expand_scalar of non-scalar");
            Tensor::full(&shape, a.item())
        })
    }

    /// `1 x c -> r x c`.
    pub fn expand_rows(self, r: usize) -> Var<'t> {
        self.tape.unary(self.id, Op::ExpandRows(self.id), |a| {
            let (one, c) = a.dims2();
            assert!(one == 1 && a.shape().len() == 2, "expand_rows needs 1 x c");
            let mut out = Vec::with_capacity(r * c);
            for _ in 0..r {
                out.extend_from_slice(a.data());
            }
            Tensor::matrix(r, c, out)
        })
    }

    /// `r x 1 -> r x c`.
    pub fn expand_cols(self, c: usize) -> Var<'t> {
        self.tape.unary(self.id, Op::ExpandCols(self.id), |a| {
            let (r, one) = a.dims2();
            assert!(one == 1 && a.shape().len() == 2, "expand_cols needs r x 1");
            let mut out = Vec::with_capacity(r * c);
            for &x in a.data() {
                out.extend(std::iter::repeat_n(x, c));
            }
            Tensor::matrix(r, c, out)
        })
    }

    pub fn reshape(self, shape: &[usize]) -> Var<'t> {
        if self.value().shape() == shape {
            return self;
        }
        let shape = shape.to_vec();
        self.tape.unary(self.id, Op::Reshape(self.id), |a| {
            a.clone().reshaped(&shape).expect("reshape")
        })
    }

    /// Contiguous run `[start, start + len)` of the flattened tensor.
    pub fn slice(self, start: usize, len: usize) -> Var<'t> {
        self.tape.unary(self.id, Op::Slice(self.id, start), |a| {
            Tensor::vector(a.data()[start..start + len].to_vec())
        })
    }

    /// Flattened tensor placed at `start` inside a zero vector of length `total`.
    pub fn pad(self, start: usize, total: usize) -> Var<'t> {
        self.tape.unary(self.id, Op::Pad(self.id, start), |a| {
            let mut out = vec![0.0; total];
            out[start..start + a.len()].copy_from_slice(a.data());
            Tensor::vector(out)
        })
    }

    /// `out[i] = flat[idx[i]]`.
    pub fn take(self, idx: Rc<[usize]>) -> Var<'t> {
        let idx2 = idx.clone();
        self.tape.unary(self.id, Op::Take(self.id, idx), move |a| {
            Tensor::vector(idx2.iter().map(|&i| a.data()[i]).collect())
        })
    }

    /// `out[idx[i]] += flat[i]`, output length `len`.
    pub fn scatter_add(self, idx: Rc<[usize]>, len: usize) -> Var<'t> {
        let idx2 = idx.clone();
        self.tape.unary(self.id, Op::ScatterAdd(self.id, idx), move |a| {
            assert_eq!(a.len(), idx2.len(), "scatter_add index length");
            let mut out = vec![0.0; len];
            for (&i, &x) in idx2.iter().zip(a.data()) {
                out[i] += x;
            }
            Tensor::vector(out)
        })
    }

    /// Row-wise maximum, `r x c -> r x 1`. Ties go to the lowest column.
    pub fn max_cols(self) -> Var<'t> {
        let av = self.value();
        let (r, c) = av.dims2();
        let mut idx = Vec::with_capacity(r);
        let mut out = Vec::with_capacity(r);
        for i in 0..r {
            let row = av.row(i);
            let mut best = 0;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            idx.push(i * c + best);
            out.push(row[best]);
        }
        drop(av);
        let idx: Rc<[usize]> = idx.into();
        self.tape
            .push(Tensor::matrix(r, 1, out), Op::MaxCols(self.id, idx), self.tape.requires(self.id))
    }

    /// Stable row-wise `log(sum(exp(.)))`, `r x c -> r x 1`.
    pub fn logsumexp_cols(self) -> Var<'t> {
        let (_, c) = self.value().dims2();
        let m = self.max_cols().detach();
        let shifted = self - m.expand_cols(c);
        shifted.exp().sum_cols().ln() + m
    }

    /// `out[i] = self[i, cols[i]]` for an `r x c` matrix.
    pub fn gather_cols(self, cols: &[usize]) -> Var<'t> {
        let (r, c) = self.value().dims2();
        assert_eq!(r, cols.len(), "gather_cols: one index per row");
        let idx: Rc<[usize]> = cols.iter().enumerate().map(|(i, &j)| i * c + j).collect();
        self.take(idx)
    }

    /// Inner product of two same-shaped vars.
    pub fn dot(self, other: Var<'t>) -> Var<'t> {
        (self * other).sum()
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len();
        self.sum().scale(1.0 / n as f64)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.same_shape(rhs, "add");
        self.tape
            .binary(self.id, rhs.id, Op::Add(self.id, rhs.id), |a, b| {
                a.zip_map(b, |x, y| x + y)
            })
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.same_shape(rhs, "sub");
        self.tape
            .binary(self.id, rhs.id, Op::Sub(self.id, rhs.id), |a, b| {
                a.zip_map(b, |x, y| x - y)
            })
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_shape(rhs, "mul");
        self.tape
            .binary(self.id, rhs.id, Op::Mul(self.id, rhs.id), |a, b| {
                a.zip_map(b, |x, y| x * y)
            })
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Neg(self.id), |a| a.map(|x| -x))
    }
}

fn check_shape(what: &str, got: &Tensor, want: &Tensor) -> Result<()> {
    if got.shape() != want.shape() {
        return Err(Error::Shape(format!(
            "{what}: expected shape {:?}, got {:?}",
            want.shape(),
            got.shape()
        )));
    }
    Ok(())
}

/// Hessian-vector product `(d^2 L / d theta^2) v` by double backward.
pub fn hvp<F>(loss: F, theta: &Tensor, v: &Tensor) -> Result<Tensor>
where
    F: for<'t> Fn(Var<'t>) -> Var<'t>,
{
    check_shape("hvp direction", v, theta)?;
    let tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let l = loss(th);
    let g = tape.grad_graph(l, &[th])?[0];
    let gv = g.dot(tape.constant(v.clone()));
    let out = tape.grad(gv, &[th])?;
    Ok(out.into_tensors().remove(0))
}

/// `v^T (d^2 L / d theta d alpha)`, shaped like `alpha`.
pub fn mixed_vjp<F>(loss: F, theta: &Tensor, alpha: &Tensor, v: &Tensor) -> Result<Tensor>
where
    F: for<'t> Fn(Var<'t>, Var<'t>) -> Var<'t>,
{
    check_shape("mixed_vjp direction", v, theta)?;
    let tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let al = tape.leaf(alpha.clone());
    let l = loss(th, al);
    let g = tape.grad_graph(l, &[th])?[0];
    let gv = g.dot(tape.constant(v.clone()));
    let out = tape.grad(gv, &[al])?;
    Ok(out.into_tensors().remove(0))
}
