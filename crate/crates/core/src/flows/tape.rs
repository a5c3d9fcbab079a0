//! Reverse-mode automatic differentiation over batched 2D arrays.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse. Forward-mode tangents are expressed with the
//! same operations, so second derivatives (gradients of divergences) come
//! for free.

use ndarray::{concatenate, s, Array2, Axis};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Tanh(Var),
    OneMinusSquare(Var),
    Square(Var),
    Sqrt(Var),
    Recip(Var),
    Ln(Var),
    Relu(Var),
    ClampMin(Var, T),
    RowSum(Var),
    SumAll(Var),
    ConcatCols(Vec<Var>),
    VStack(Vec<Var>),
    SliceRows(Var, usize, usize),
    SliceCols(Var, usize, usize),
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    values: Vec<Array2<T>>,
    ops: Vec<Op<T>>,
    grad: Vec<bool>,
}

/// Adjoints indexed by [`Var`]; `None` for nodes the output does not
/// depend on (or that are constants).
pub struct Gradients<T> {
    adj: Vec<Option<Array2<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.adj.get(v.0).and_then(|a| a.as_ref())
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { values: Vec::new(), ops: Vec::new(), grad: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Drops every node created after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.values.truncate(len);
        self.ops.truncate(len);
        self.grad.truncate(len);
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.values[v.0]
    }

    /// Differentiable input.
    pub fn param(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, grad: bool) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.grad.push(grad);
        Var(self.values.len() - 1)
    }

    fn unary(&mut self, a: Var, value: Array2<T>, op: Op<T>) -> Var {
        let g = self.grad[a.0];
        self.push(value, op, g)
    }

    fn binary(&mut self, a: Var, b: Var, value: Array2<T>, op: Op<T>) -> Var {
        let g = self.grad[a.0] || self.grad[b.0];
        self.push(value, op, g)
    }

    fn v(&self, a: Var) -> &Array2<T> {
        &self.values[a.0]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a).dot(self.v(b));
        self.binary(a, b, v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a) + self.v(b);
        self.binary(a, b, v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a) - self.v(b);
        self.binary(a, b, v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a) * self.v(b);
        self.binary(a, b, v, Op::Mul(a, b))
    }

    /// `a + row` with `row` of shape `1 × m` broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.v(a) + self.v(row);
        self.binary(a, row, v, Op::AddRow(a, row))
    }

    /// `a ⊙ col` with `col` of shape `n × 1` broadcast over columns.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let v = self.v(a) * self.v(col);
        self.binary(a, col, v, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.v(a) * s;
        self.unary(a, v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        let v = self.v(a) + s;
        self.unary(a, v, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| x.tanh());
        self.unary(a, v, Op::Tanh(a))
    }

    /// `1 − a²`, the tanh derivative in terms of its output.
    pub fn one_minus_square(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| T::one() - x * x);
        self.unary(a, v, Op::OneMinusSquare(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| x * x);
        self.unary(a, v, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| x.sqrt());
        self.unary(a, v, Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| x.recip());
        self.unary(a, v, Op::Recip(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| x.ln());
        self.unary(a, v, Op::Ln(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.v(a).mapv(|x| x.max(T::zero()));
        self.unary(a, v, Op::Relu(a))
    }

    /// `max(a, floor)`; no gradient flows where the floor is active.
    pub fn clamp_min(&mut self, a: Var, floor: T) -> Var {
        let v = self.v(a).mapv(|x| x.max(floor));
        self.unary(a, v, Op::ClampMin(a, floor))
    }

    /// Row sums, `n × m → n × 1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.v(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.unary(a, v, Op::RowSum(a))
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.v(a).sum());
        self.unary(a, v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = T::of_usize(self.v(a).len());
        let s = self.sum_all(a);
        self.scale(s, T::one() / n)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.v(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("row counts agree");
        let g = parts.iter().any(|p| self.grad[p.0]);
        self.push(v, Op::ConcatCols(parts.to_vec()), g)
    }

    pub fn vstack(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.v(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("column counts agree");
        let g = parts.iter().any(|p| self.grad[p.0]);
        self.push(v, Op::VStack(parts.to_vec()), g)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.v(a).slice(s![start..start + len, ..]).to_owned();
        self.unary(a, v, Op::SliceRows(a, start, len))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.v(a).slice(s![.., start..start + len]).to_owned();
        self.unary(a, v, Op::SliceCols(a, start, len))
    }

    /// Adjoints of every node with respect to the `1 × 1` node `out`.
    pub fn backward(&self, out: Var) -> Gradients<T> {
        assert_eq!(self.values[out.0].dim(), (1, 1), "backward needs a scalar output");
        let mut adj: Vec<Option<Array2<T>>> = vec![None; out.0 + 1];
        adj[out.0] = Some(Array2::from_elem((1, 1), T::one()));
        for i in (0..=out.0).rev() {
            if !self.grad[i] {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            let acc = |v: Var, d: Array2<T>, adj: &mut Vec<Option<Array2<T>>>| {
                if !self.grad[v.0] {
                    return;
                }
                match &mut adj[v.0] {
                    Some(a) => *a += &d,
                    slot => *slot = Some(d),
                }
            };
            match &self.ops[i] {
                Op::Leaf => {
                    adj[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.grad[a.0] {
                        acc(*a, g.dot(&self.v(*b).t()), &mut adj);
                    }
                    if self.grad[b.0] {
                        acc(*b, self.v(*a).t().dot(&g), &mut adj);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone(), &mut adj);
                    acc(*b, g, &mut adj);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.mapv(|v| -v), &mut adj);
                    acc(*a, g, &mut adj);
                }
                Op::Mul(a, b) => {
                    acc(*a, &g * self.v(*b), &mut adj);
                    acc(*b, &g * self.v(*a), &mut adj);
                }
                Op::AddRow(a, row) => {
                    acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut adj);
                    acc(*a, g, &mut adj);
                }
                Op::MulCol(a, col) => {
                    if self.grad[col.0] {
                        acc(*col, (&g * self.v(*a)).sum_axis(Axis(1)).insert_axis(Axis(1)), &mut adj);
                    }
                    acc(*a, &g * self.v(*col), &mut adj);
                }
                Op::Scale(a, s) => acc(*a, g * *s, &mut adj),
                Op::AddScalar(a) => acc(*a, g, &mut adj),
                Op::Tanh(a) => {
                    let y = &self.values[i];
                    acc(*a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g * (T::one() - y * y)), &mut adj);
                }
                Op::OneMinusSquare(a) => {
                    let x = self.v(*a);
                    acc(*a, ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| -(g * (x + x))), &mut adj);
                }
                Op::Square(a) => {
                    let x = self.v(*a);
                    acc(*a, ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| g * (x + x)), &mut adj);
                }
                Op::Sqrt(a) => {
                    let y = &self.values[i];
                    acc(*a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g / (y + y)), &mut adj);
                }
                Op::Recip(a) => {
                    let y = &self.values[i];
                    acc(*a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| -(g * y * y)), &mut adj);
                }
                Op::Ln(a) => acc(*a, &g / self.v(*a), &mut adj),
                Op::Relu(a) => {
                    let x = self.v(*a);
                    let d = ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| if x > T::zero() { g } else { T::zero() });
                    acc(*a, d, &mut adj);
                }
                Op::ClampMin(a, floor) => {
                    let x = self.v(*a);
                    let d = ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| if x > *floor { g } else { T::zero() });
                    acc(*a, d, &mut adj);
                }
                Op::RowSum(a) => {
                    let shape = self.v(*a).raw_dim();
                    let d = g.broadcast(shape).expect("column broadcast").to_owned();
                    acc(*a, d, &mut adj);
                }
                Op::SumAll(a) => {
                    let d = Array2::from_elem(self.v(*a).raw_dim(), g[[0, 0]]);
                    acc(*a, d, &mut adj);
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for p in parts {
                        let w = self.v(*p).ncols();
                        acc(*p, g.slice(s![.., c..c + w]).to_owned(), &mut adj);
                        c += w;
                    }
                }
                Op::VStack(parts) => {
                    let mut r = 0;
                    for p in parts {
                        let h = self.v(*p).nrows();
                        acc(*p, g.slice(s![r..r + h, ..]).to_owned(), &mut adj);
                        r += h;
                    }
                }
                Op::SliceRows(a, start, len) => {
                    if self.grad[a.0] {
                        let mut d = Array2::zeros(self.v(*a).raw_dim());
                        d.slice_mut(s![*start..*start + *len, ..]).assign(&g);
                        acc(*a, d, &mut adj);
                    }
                }
                Op::SliceCols(a, start, len) => {
                    if self.grad[a.0] {
                        let mut d = Array2::zeros(self.v(*a).raw_dim());
                        d.slice_mut(s![.., *start..*start + *len]).assign(&g);
                        acc(*a, d, &mut adj);
                    }
                }
            }
        }
        Gradients { adj }
    }
}
