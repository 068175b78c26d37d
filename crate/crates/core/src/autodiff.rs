//! A small reverse-mode tape over 2-D matrices.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates gradients. Leaves created
//! with [`Tape::param`] remember which parameter they came from so the
//! gradients can be handed back to a [`ParamStore`].

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{ParamId, ParamStore};
use crate::scalar::{sorted_sum, Scalar};

/// Handle to a value on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    OnePlusScale(Var, Var),
    Scale(Var, F),
    Gather(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    Abs(Var),
    SumAll(Var),
}

#[derive(Debug)]
struct Node<F> {
    value: Matrix<F>,
    op: Op<F>,
    param: Option<ParamId>,
}

#[derive(Debug, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    consumed: bool,
}

/// Gradients of a scalar with respect to every parameter placed on the
/// tape. Parameters that never reached the loss get a zero matrix.
#[derive(Clone, Debug)]
pub struct Gradients<F> {
    grads: Vec<Option<Matrix<F>>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn get(&self, id: ParamId) -> Option<&Matrix<F>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Zero gradients shaped like every parameter of `store`.
    pub fn zeros_like(store: &ParamStore<F>) -> Self {
        Self {
            grads: store
                .iter()
                .map(|(_, _, v)| Some(Matrix::zeros(v.rows(), v.cols())))
                .collect(),
        }
    }

    /// `self += other`, parameter by parameter.
    pub fn accumulate(&mut self, other: &Gradients<F>) {
        if self.grads.len() < other.grads.len() {
            self.grads.resize(other.grads.len(), None);
        }
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            match (mine.as_mut(), theirs) {
                (Some(a), Some(b)) => {
                    for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                        *x = *x + y;
                    }
                }
                (None, Some(b)) => *mine = Some(b.clone()),
                _ => {}
            }
        }
    }

    pub fn scale(&mut self, c: F) {
        for g in self.grads.iter_mut().flatten() {
            for x in g.data_mut() {
                *x = *x * c;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.data().iter().all(|x| x.is_finite()))
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), consumed: false }
    }

    fn push(&mut self, value: Matrix<F>, op: Op<F>) -> Var {
        self.nodes.push(Node { value, op, param: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix<F> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Matrix<F>) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        let v = self.push(store.value(id).clone(), Op::Leaf);
        self.nodes[v.0].param = Some(id);
        v
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn check(&self, ok: bool, what: &str, a: Var, b: Var) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what}: incompatible shapes {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )))
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(self.shape(a).1 == self.shape(b).0, "matmul", a, b)?;
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(self.shape(a) == self.shape(b), "add", a, b)?;
        let mut value = self.value(a).clone();
        for (x, &y) in value.data_mut().iter_mut().zip(self.value(b).data()) {
            *x = *x + y;
        }
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(self.shape(a) == self.shape(b), "sub", a, b)?;
        let mut value = self.value(a).clone();
        for (x, &y) in value.data_mut().iter_mut().zip(self.value(b).data()) {
            *x = *x - y;
        }
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// `a + 1 * bias` with `bias` a single row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, c) = self.shape(a);
        self.check(self.shape(bias) == (1, c), "add_bias", a, bias)?;
        let mut value = self.value(a).clone();
        let b = self.value(bias).row(0).to_vec();
        for r in 0..value.rows() {
            for (x, &y) in value.row_mut(r).iter_mut().zip(&b) {
                *x = *x + y;
            }
        }
        Ok(self.push(value, Op::AddBias(a, bias)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > F::zero() { x } else { F::zero() });
        self.push(value, Op::Relu(a))
    }

    /// `(1 + eps) * a` with `eps` a 1x1 matrix.
    pub fn one_plus_scale(&mut self, a: Var, eps: Var) -> Result<Var> {
        self.check(self.shape(eps) == (1, 1), "one_plus_scale", a, eps)?;
        let f = F::one() + self.value(eps)[(0, 0)];
        let value = self.value(a).map(|x| f * x);
        Ok(self.push(value, Op::OnePlusScale(a, eps)))
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let value = self.value(a).map(|x| c * x);
        self.push(value, Op::Scale(a, c))
    }

    /// Row `i` of the result is row `rows[i]` of `a`.
    pub fn gather(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let src = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= src.rows()) {
            return Err(Error::contract(format!("gather row {bad} out of {} rows", src.rows())));
        }
        let c = src.cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            data.extend_from_slice(src.row(r));
        }
        let value = Matrix::from_vec(rows.len(), c, data)?;
        Ok(self.push(value, Op::Gather(a, rows.to_vec())))
    }

    /// Row `s` of the result sums the rows `i` of `a` with
    /// `segments[i] == s`. Each column is summed in sorted order, so the
    /// result does not depend on the order of the contributing rows.
    pub fn segment_sum(&mut self, a: Var, segments: &[usize], num_segments: usize) -> Result<Var> {
        let src = self.value(a);
        if segments.len() != src.rows() {
            return Err(Error::contract(format!(
                "segment_sum: {} segment ids for {} rows",
                segments.len(),
                src.rows()
            )));
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= num_segments) {
            return Err(Error::contract(format!("segment id {bad} >= {num_segments}")));
        }
        let c = src.cols();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_segments];
        for (i, &s) in segments.iter().enumerate() {
            members[s].push(i);
        }
        let mut value = Matrix::zeros(num_segments, c);
        let mut buf = Vec::new();
        for (s, rows) in members.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            for col in 0..c {
                buf.clear();
                buf.extend(rows.iter().map(|&r| src[(r, col)]));
                value[(s, col)] = sorted_sum(&mut buf);
            }
        }
        Ok(self.push(value, Op::SegmentSum(a, segments.to_vec())))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.abs());
        self.push(value, Op::Abs(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let mut vals = self.value(a).data().to_vec();
        let value = Matrix::filled(1, 1, sorted_sum(&mut vals));
        self.push(value, Op::SumAll(a))
    }

    /// Which side of its kink every `relu` and `abs` input lies on. Two
    /// tapes of the same computation with equal patterns lie in the same
    /// linear piece.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Relu(a) => out.extend(self.value(a).data().iter().map(|&x| x > F::zero())),
                Op::Abs(a) => out.extend(self.value(a).data().iter().map(|&x| x >= F::zero())),
                _ => {}
            }
        }
        out
    }

    /// Reverse pass from a 1x1 value. A tape supports one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<F>> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::contract(format!("backward from non-scalar of shape {:?}", self.shape(loss))));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, F::one()));
        let mut out: Vec<Option<Matrix<F>>> = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut send = |target: Var, delta: Matrix<F>| {
                match &mut grads[target.0] {
                    Some(acc) => {
                        for (x, &y) in acc.data_mut().iter_mut().zip(delta.data()) {
                            *x = *x + y;
                        }
                    }
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {
                    if let Some(id) = node.param {
                        if out.len() <= id.0 {
                            out.resize(id.0 + 1, None);
                        }
                        match &mut out[id.0] {
                            Some(acc) => {
                                for (x, &y) in acc.data_mut().iter_mut().zip(g.data()) {
                                    *x = *x + y;
                                }
                            }
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let da = g.matmul(&bv.transpose());
                    let db = av.transpose().matmul(&g);
                    send(*a, da);
                    send(*b, db);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|x| -x));
                    send(*a, g);
                }
                Op::AddBias(a, bias) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (x, &y) in db.row_mut(0).iter_mut().zip(g.row(r)) {
                            *x = *x + y;
                        }
                    }
                    send(*bias, db);
                    send(*a, g);
                }
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    let mut d = g;
                    for (x, &y) in d.data_mut().iter_mut().zip(av.data()) {
                        if y <= F::zero() {
                            *x = F::zero();
                        }
                    }
                    send(*a, d);
                }
                Op::OnePlusScale(a, eps) => {
                    let av = &self.nodes[a.0].value;
                    let f = F::one() + self.nodes[eps.0].value[(0, 0)];
                    let de = av.data().iter().zip(g.data()).fold(F::zero(), |s, (&x, &y)| s + x * y);
                    send(*eps, Matrix::filled(1, 1, de));
                    send(*a, g.map(|x| f * x));
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    send(*a, g.map(|x| c * x));
                }
                Op::Gather(a, rows) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    let mut d = Matrix::zeros(r, c);
                    for (i, &src) in rows.iter().enumerate() {
                        for (x, &y) in d.row_mut(src).iter_mut().zip(g.row(i)) {
                            *x = *x + y;
                        }
                    }
                    send(*a, d);
                }
                Op::SegmentSum(a, segments) => {
                    let c = g.cols();
                    let mut data = Vec::with_capacity(segments.len() * c);
                    for &s in segments {
                        data.extend_from_slice(g.row(s));
                    }
                    send(*a, Matrix::from_vec(segments.len(), c, data).expect("shape"));
                }
                Op::Abs(a) => {
                    let av = &self.nodes[a.0].value;
                    let mut d = g;
                    for (x, &y) in d.data_mut().iter_mut().zip(av.data()) {
                        *x = if y > F::zero() {
                            *x
                        } else if y < F::zero() {
                            -*x
                        } else {
                            F::zero()
                        };
                    }
                    send(*a, d);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    send(*a, Matrix::filled(r, c, g[(0, 0)]));
                }
            }
        }
        Ok(Gradients { grads: out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn linear_gradient_is_input() {
        let mut store = ParamStore::new();
        let w = store.add("w", m(3, 1, &[0.5, -1.0, 2.0])).unwrap();
        let mut t = Tape::new();
        let x = t.constant(m(1, 3, &[1.0, 2.0, 3.0]));
        let wv = t.param(&store, w);
        let y = t.matmul(x, wv).unwrap();
        let loss = t.sum_all(y);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn unused_parameter_has_no_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", m(1, 1, &[1.0])).unwrap();
        let b = store.add("b", m(1, 1, &[1.0])).unwrap();
        let mut t = Tape::new();
        let av = t.param(&store, a);
        let _bv = t.param(&store, b);
        let loss = t.sum_all(av);
        let g = t.backward(loss).unwrap();
        let mut full = Gradients::zeros_like(&store);
        full.accumulate(&g);
        assert_eq!(full.get(b).unwrap().data(), &[0.0]);
    }

    #[test]
    fn backward_twice_fails() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(1, 1, &[1.0]));
        let l = t.sum_all(x);
        t.backward(l).unwrap();
        assert!(matches!(t.backward(l), Err(Error::BackwardTwice)));
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.constant(Matrix::zeros(2, 3));
        assert!(t.matmul(a, b).is_err());
        assert!(t.add_bias(a, b).is_err());
        assert!(t.gather(a, &[2]).is_err());
        assert!(t.segment_sum(a, &[0], 1).is_err());
        let s = t.sum_all(a);
        assert!(t.backward(a).is_err());
        let _ = s;
    }

    #[test]
    fn gather_and_segment_sum_roundtrip() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let g = t.gather(x, &[2, 0, 2]).unwrap();
        assert_eq!(t.value(g).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let s = t.segment_sum(g, &[1, 0, 1], 3).unwrap();
        assert_eq!(t.value(s).data(), &[1.0, 2.0, 10.0, 12.0, 0.0, 0.0]);
    }

    fn numeric_check(build: impl Fn(&mut Tape<f64>, &ParamStore<f64>) -> Var, store: &mut ParamStore<f64>) {
        let mut t = Tape::new();
        let loss = build(&mut t, store);
        let g = t.backward(loss).unwrap();
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            let len = store.value(id).data().len();
            for k in 0..len {
                let orig = store.value(id).data()[k];
                let h = 1e-6;
                store.value_mut(id).data_mut()[k] = orig + h;
                let mut tp = Tape::new();
                let lp = build(&mut tp, store);
                let fp = tp.value(lp)[(0, 0)];
                store.value_mut(id).data_mut()[k] = orig - h;
                let mut tm = Tape::new();
                let lm = build(&mut tm, store);
                let fm = tm.value(lm)[(0, 0)];
                store.value_mut(id).data_mut()[k] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let ad = g.get(id).map_or(0.0, |m| m.data()[k]);
                assert!((fd - ad).abs() < 1e-6 * (1.0 + fd.abs()), "param {id:?}[{k}]: {fd} vs {ad}");
            }
        }
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut store = ParamStore::new();
        let w = store.add("w", m(2, 2, &[0.3, -0.7, 1.1, 0.4])).unwrap();
        let b = store.add("b", m(1, 2, &[0.05, -0.2])).unwrap();
        let e = store.add("eps", m(1, 1, &[0.25])).unwrap();
        numeric_check(
            |t, s| {
                let x = t.constant(m(3, 2, &[1.0, -2.0, 0.5, 1.5, -1.0, 0.75]));
                let wv = t.param(s, w);
                let bv = t.param(s, b);
                let ev = t.param(s, e);
                let h = t.matmul(x, wv).unwrap();
                let h = t.add_bias(h, bv).unwrap();
                let r = t.relu(h);
                let sc = t.one_plus_scale(r, ev).unwrap();
                let ga = t.gather(sc, &[0, 2, 2, 1]).unwrap();
                let seg = t.segment_sum(ga, &[1, 0, 1, 1], 2).unwrap();
                let half = t.scale(seg, 0.5);
                let tgt = t.constant(m(2, 2, &[3.0, 3.0, -3.0, 3.0]));
                let d = t.sub(half, tgt).unwrap();
                let d2 = t.add(d, half).unwrap();
                let a = t.abs(d2);
                t.sum_all(a)
            },
            &mut store,
        );
    }
}
