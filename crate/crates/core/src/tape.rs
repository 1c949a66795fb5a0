//! Minimal dense kernel with reverse-mode gradient propagation.
//!
//! Values are computed eagerly as operations are recorded on a Wengert tape;
//! `backward` replays the tape in reverse, accumulating vector-Jacobian
//! products into per-node gradient buffers. Every primitive here is
//! finite-difference verifiable (see the `gradcheck` module and the test
//! suites).
//!
//! The op set is exactly what the model needs: no broadcasting, no views,
//! no graph rewriting.

use crate::error::{Error, Result};
use crate::real::Real;

/// Norm threshold below which `l2_normalize` refuses to divide.
pub const EPS_NORM: f64 = 1e-12;

/// Dense row-major array. The only tensor type in the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> DenseArray<F> {
    /// Build an array, checking the shape/length contract and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(
                "dense_array",
                format!("shape {:?} does not describe {} elements", shape, data.len()),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: format!("dense array of shape {:?}", shape) });
        }
        Ok(DenseArray { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        DenseArray { shape, data: vec![F::zero(); n] }
    }

    pub fn vector(data: Vec<F>) -> Result<Self> {
        let n = data.len();
        DenseArray::new(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        DenseArray::new(vec![rows, cols], data)
    }

    pub fn scalar(x: F) -> Self {
        DenseArray { shape: vec![1], data: vec![x] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, F> {
        self.data.iter()
    }

    /// Matrix rows, when shaped `[r, c]`.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<F> {
    /// Input or parameter; no inputs of its own.
    Leaf,
    /// y = M x (+ b)
    Affine { m: Var, x: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    /// Hadamard product.
    Mul(Var, Var),
    /// Scalar inner product.
    Dot(Var, Var),
    /// y = c * x for a compile-time constant c (not a tape node).
    Scale { x: Var, c: F },
    /// y = s * x where s is a scalar node.
    ScalarMul { s: Var, x: Var },
    /// Assemble a vector out of scalar nodes.
    Stack(Vec<Var>),
    /// Extract element i of a vector as a scalar node.
    Pick { x: Var, i: usize },
    Sigmoid(Var),
    Tanh(Var),
    /// Parametric ReLU with a scalar slope node shared across elements.
    Prelu { x: Var, slope: Var },
    Softmax(Var),
    L2Normalize(Var),
    /// Fused stable cross-entropy from logits: logsumexp(z) - z[class].
    CrossEntropy { logits: Var, class: usize },
    FrobeniusNorm(Var),
}

struct Node<F> {
    op: Op<F>,
    value: DenseArray<F>,
}

/// Gradients extracted by `Tape::backward`. Nodes that the loss never
/// touched report zero.
pub struct Gradients<F> {
    grads: Vec<Option<Vec<F>>>,
    lens: Vec<usize>,
}

impl<F: Real> Gradients<F> {
    /// Gradient buffer for `v`, or `None` if no gradient flowed to it.
    pub fn get(&self, v: Var) -> Option<&[F]> {
        self.grads[v.0].as_deref()
    }

    /// Gradient for `v`, materializing zeros for untouched nodes.
    pub fn take(&mut self, v: Var) -> Vec<F> {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => vec![F::zero(); self.lens[v.0]],
        }
    }
}

/// Eager Wengert tape. Single-threaded: a tape is never shared across
/// threads, and a fresh tape is built per forward pass.
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Register a leaf node (input or parameter).
    pub fn leaf(&mut self, value: DenseArray<F>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn leaf_vector(&mut self, data: &[F]) -> Var {
        self.leaf(DenseArray { shape: vec![data.len()], data: data.to_vec() })
    }

    pub fn leaf_scalar(&mut self, x: F) -> Var {
        self.leaf(DenseArray::scalar(x))
    }

    pub fn value(&self, v: Var) -> &DenseArray<F> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a shape-[1] node.
    pub fn scalar_value(&self, v: Var) -> F {
        self.nodes[v.0].value.data[0]
    }

    fn push(&mut self, op: Op<F>, value: DenseArray<F>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn data(&self, v: Var) -> &[F] {
        &self.nodes[v.0].value.data
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    // ── primitive operations ─────────────────────────────────────────

    /// y = M x (+ b). M is `[p, q]`, x is `[q]`, b is `[p]`.
    pub fn affine(&mut self, m: Var, x: Var, b: Option<Var>) -> Result<Var> {
        let mshape = self.shape(m).to_vec();
        if mshape.len() != 2 {
            return Err(Error::dim("affine", format!("M has shape {:?}, want a matrix", mshape)));
        }
        let (p, q) = (mshape[0], mshape[1]);
        if self.shape(x) != [q] {
            return Err(Error::dim(
                "affine",
                format!("M is [{p}, {q}] but x has shape {:?}", self.shape(x)),
            ));
        }
        if let Some(b) = b {
            if self.shape(b) != [p] {
                return Err(Error::dim(
                    "affine",
                    format!("bias has shape {:?}, want [{p}]", self.shape(b)),
                ));
            }
        }
        let mdata = self.data(m);
        let xdata = self.data(x);
        let mut y: Vec<F> = mdata
            .chunks_exact(q)
            .map(|row| row.iter().zip(xdata).map(|(&a, &b)| a * b).sum())
            .collect();
        if let Some(b) = b {
            for (yi, &bi) in y.iter_mut().zip(self.data(b)) {
                *yi = *yi + bi;
            }
        }
        Ok(self.push(Op::Affine { m, x, b }, DenseArray { shape: vec![p], data: y }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip2("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip2("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip2("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn zip2(
        &mut self,
        opname: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(F, F) -> F,
        op: Op<F>,
    ) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                opname,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let data: Vec<F> =
            self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, DenseArray { shape, data }))
    }

    /// Scalar inner product of two same-length nodes.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                "dot",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let s: F = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x * y).sum();
        Ok(self.push(Op::Dot(a, b), DenseArray::scalar(s)))
    }

    /// Multiply by a constant that is not itself differentiated.
    pub fn scale(&mut self, x: Var, c: F) -> Var {
        let data: Vec<F> = self.data(x).iter().map(|&v| c * v).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Scale { x, c }, DenseArray { shape, data })
    }

    /// y = s * x where `s` is a scalar node.
    pub fn scalar_mul(&mut self, s: Var, x: Var) -> Result<Var> {
        if self.shape(s) != [1] {
            return Err(Error::dim("scalar_mul", format!("s has shape {:?}", self.shape(s))));
        }
        let sv = self.data(s)[0];
        let data: Vec<F> = self.data(x).iter().map(|&v| sv * v).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::ScalarMul { s, x }, DenseArray { shape, data }))
    }

    /// Assemble scalar nodes into one vector node.
    pub fn stack(&mut self, parts: Vec<Var>) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("stack of zero scalars".into()));
        }
        let mut data = Vec::with_capacity(parts.len());
        for &p in &parts {
            if self.shape(p) != [1] {
                return Err(Error::dim("stack", format!("part has shape {:?}", self.shape(p))));
            }
            data.push(self.data(p)[0]);
        }
        let n = data.len();
        Ok(self.push(Op::Stack(parts), DenseArray { shape: vec![n], data }))
    }

    /// Extract element `i` of a vector as a scalar node.
    pub fn pick(&mut self, x: Var, i: usize) -> Result<Var> {
        if i >= self.data(x).len() {
            return Err(Error::dim("pick", format!("index {i} out of {}", self.data(x).len())));
        }
        let v = self.data(x)[i];
        Ok(self.push(Op::Pick { x, i }, DenseArray::scalar(v)))
    }

    /// Elementwise logistic sigmoid; output strictly in (0, 1).
    pub fn sigmoid(&mut self, x: Var) -> Var {
        let data: Vec<F> = self.data(x).iter().map(|&v| sigmoid_scalar(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Sigmoid(x), DenseArray { shape, data })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let data: Vec<F> = self.data(x).iter().map(|&v| v.tanh()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Tanh(x), DenseArray { shape, data })
    }

    /// Parametric ReLU: x where x >= 0, slope * x where x < 0. The subgradient
    /// at 0 takes the positive branch. `slope` is a shared scalar node.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        if self.shape(slope) != [1] {
            return Err(Error::dim("prelu", format!("slope has shape {:?}", self.shape(slope))));
        }
        let s = self.data(slope)[0];
        let data: Vec<F> =
            self.data(x).iter().map(|&v| if v >= F::zero() { v } else { s * v }).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::Prelu { x, slope }, DenseArray { shape, data }))
    }

    /// Probabilities summing to 1, computed with max-subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        if self.data(x).is_empty() {
            return Err(Error::EmptyInput("softmax of empty vector".into()));
        }
        let data = softmax_slice(self.data(x));
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::Softmax(x), DenseArray { shape, data }))
    }

    /// x / |x|, rejecting near-zero norms rather than clamping them.
    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        let norm: F = self.data(x).iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm.to_f64() <= EPS_NORM {
            return Err(Error::DegenerateNorm {
                op: "l2_normalize",
                norm: norm.to_f64(),
                eps: EPS_NORM,
            });
        }
        let data: Vec<F> = self.data(x).iter().map(|&v| v / norm).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::L2Normalize(x), DenseArray { shape, data }))
    }

    /// -log softmax(logits)[class], fused for stability.
    pub fn cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let z = self.data(logits);
        if class >= z.len() {
            return Err(Error::dim(
                "cross_entropy",
                format!("class {class} out of {} logits", z.len()),
            ));
        }
        let m = z.iter().cloned().fold(F::neg_infinity(), F::max);
        let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<F>().ln();
        let loss = lse - z[class];
        Ok(self.push(Op::CrossEntropy { logits, class }, DenseArray::scalar(loss)))
    }

    /// Frobenius norm of any node, with subgradient 0 at the origin.
    pub fn frobenius_norm(&mut self, x: Var) -> Var {
        let n: F = self.data(x).iter().map(|&v| v * v).sum::<F>().sqrt();
        self.push(Op::FrobeniusNorm(x), DenseArray::scalar(n))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss node. Replays the tape once, in
    /// reverse order; identical inputs give bit-identical gradients.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<F>> {
        if self.shape(loss) != [1] {
            return Err(Error::NotScalar { shape: self.shape(loss).to_vec() });
        }
        if !self.scalar_value(loss).is_finite() {
            return Err(Error::NonFinite { what: "loss before backward".into() });
        }
        let mut grads: Vec<Option<Vec<F>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![F::one()]);

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            // Re-stored below unless the node is a leaf (leaves keep their
            // accumulated gradient for extraction).
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Affine { m, x, b } => {
                    let (m, x, b) = (*m, *x, *b);
                    let q = self.shape(m)[1];
                    let xdata = self.data(x);
                    let mdata = self.data(m);
                    // dM += g ⊗ x
                    {
                        let gm = acc(&mut grads, m.0, self.nodes[m.0].value.len());
                        for (r, &gi) in g.iter().enumerate() {
                            let row = &mut gm[r * q..(r + 1) * q];
                            for (dst, &xj) in row.iter_mut().zip(xdata) {
                                *dst = *dst + gi * xj;
                            }
                        }
                    }
                    // dx += Mᵀ g
                    let mut dx = vec![F::zero(); q];
                    for (r, &gi) in g.iter().enumerate() {
                        let row = &mdata[r * q..(r + 1) * q];
                        for (dst, &mrj) in dx.iter_mut().zip(row) {
                            *dst = *dst + gi * mrj;
                        }
                    }
                    add_into(acc(&mut grads, x.0, q), &dx);
                    if let Some(b) = b {
                        add_into(acc(&mut grads, b.0, g.len()), &g);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    add_into(acc(&mut grads, a.0, g.len()), &g);
                    add_into(acc(&mut grads, b.0, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    add_into(acc(&mut grads, a.0, g.len()), &g);
                    let gb = acc(&mut grads, b.0, g.len());
                    for (dst, &gi) in gb.iter_mut().zip(&g) {
                        *dst = *dst - gi;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da: Vec<F> =
                        g.iter().zip(self.data(b)).map(|(&gi, &bi)| gi * bi).collect();
                    let db: Vec<F> =
                        g.iter().zip(self.data(a)).map(|(&gi, &ai)| gi * ai).collect();
                    add_into(acc(&mut grads, a.0, da.len()), &da);
                    add_into(acc(&mut grads, b.0, db.len()), &db);
                }
                Op::Dot(a, b) => {
                    let (a, b) = (*a, *b);
                    let g0 = g[0];
                    let da: Vec<F> = self.data(b).iter().map(|&bi| g0 * bi).collect();
                    let db: Vec<F> = self.data(a).iter().map(|&ai| g0 * ai).collect();
                    add_into(acc(&mut grads, a.0, da.len()), &da);
                    add_into(acc(&mut grads, b.0, db.len()), &db);
                }
                Op::Scale { x, c } => {
                    let (x, c) = (*x, *c);
                    let dx: Vec<F> = g.iter().map(|&gi| c * gi).collect();
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                }
                Op::ScalarMul { s, x } => {
                    let (s, x) = (*s, *x);
                    let sv = self.data(s)[0];
                    let ds: F = g.iter().zip(self.data(x)).map(|(&gi, &xi)| gi * xi).sum();
                    acc(&mut grads, s.0, 1)[0] = acc(&mut grads, s.0, 1)[0] + ds;
                    let dx: Vec<F> = g.iter().map(|&gi| sv * gi).collect();
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                }
                Op::Stack(parts) => {
                    let parts = parts.clone();
                    for (&p, &gi) in parts.iter().zip(&g) {
                        acc(&mut grads, p.0, 1)[0] = acc(&mut grads, p.0, 1)[0] + gi;
                    }
                }
                Op::Pick { x, i } => {
                    let (x, i) = (*x, *i);
                    let n = self.nodes[x.0].value.len();
                    let gx = acc(&mut grads, x.0, n);
                    gx[i] = gx[i] + g[0];
                }
                Op::Sigmoid(x) => {
                    let x = *x;
                    let y = &self.nodes[i].value.data;
                    let dx: Vec<F> = g
                        .iter()
                        .zip(y)
                        .map(|(&gi, &yi)| gi * yi * (F::one() - yi))
                        .collect();
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                }
                Op::Tanh(x) => {
                    let x = *x;
                    let y = &self.nodes[i].value.data;
                    let dx: Vec<F> =
                        g.iter().zip(y).map(|(&gi, &yi)| gi * (F::one() - yi * yi)).collect();
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                }
                Op::Prelu { x, slope } => {
                    let (x, slope) = (*x, *slope);
                    let s = self.data(slope)[0];
                    let xdata = self.data(x);
                    let mut dslope = F::zero();
                    let mut dx = vec![F::zero(); xdata.len()];
                    for ((&gi, &xi), dst) in g.iter().zip(xdata).zip(dx.iter_mut()) {
                        if xi >= F::zero() {
                            *dst = gi;
                        } else {
                            *dst = gi * s;
                            dslope = dslope + gi * xi;
                        }
                    }
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                    acc(&mut grads, slope.0, 1)[0] = acc(&mut grads, slope.0, 1)[0] + dslope;
                }
                Op::Softmax(x) => {
                    let x = *x;
                    let y = &self.nodes[i].value.data;
                    let gdoty: F = g.iter().zip(y).map(|(&gi, &yi)| gi * yi).sum();
                    let dx: Vec<F> =
                        g.iter().zip(y).map(|(&gi, &yi)| yi * (gi - gdoty)).collect();
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                }
                Op::L2Normalize(x) => {
                    let x = *x;
                    let y = &self.nodes[i].value.data;
                    let norm: F =
                        self.data(x).iter().map(|&v| v * v).sum::<F>().sqrt();
                    let gdoty: F = g.iter().zip(y).map(|(&gi, &yi)| gi * yi).sum();
                    let dx: Vec<F> = g
                        .iter()
                        .zip(y)
                        .map(|(&gi, &yi)| (gi - yi * gdoty) / norm)
                        .collect();
                    add_into(acc(&mut grads, x.0, dx.len()), &dx);
                }
                Op::CrossEntropy { logits, class } => {
                    let (logits, class) = (*logits, *class);
                    let probs = softmax_slice(self.data(logits));
                    let g0 = g[0];
                    let mut dz: Vec<F> = probs.iter().map(|&p| g0 * p).collect();
                    dz[class] = dz[class] - g0;
                    add_into(acc(&mut grads, logits.0, dz.len()), &dz);
                }
                Op::FrobeniusNorm(x) => {
                    let x = *x;
                    let n = self.nodes[i].value.data[0];
                    if n > F::zero() {
                        let g0 = g[0];
                        let dx: Vec<F> = self.data(x).iter().map(|&v| g0 * v / n).collect();
                        add_into(acc(&mut grads, x.0, dx.len()), &dx);
                    }
                    // at the origin the subgradient is 0: nothing to add
                }
            }
        }

        let lens = self.nodes.iter().map(|n| n.value.len()).collect();
        Ok(Gradients { grads, lens })
    }
}

fn acc<F: Real>(grads: &mut [Option<Vec<F>>], idx: usize, len: usize) -> &mut Vec<F> {
    grads[idx].get_or_insert_with(|| vec![F::zero(); len])
}

fn add_into<F: Real>(dst: &mut [F], src: &[F]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Numerically careful logistic sigmoid.
pub fn sigmoid_scalar<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn softmax_slice<F: Real>(z: &[F]) -> Vec<F> {
    let m = z.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = z.iter().map(|&v| (v - m).exp()).collect();
    let sum: F = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vecf(v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    #[test]
    fn affine_identity_and_zero() {
        let mut t = Tape::<f64>::new();
        let m = t.leaf(DenseArray::matrix(2, 2, vecf(&[1.0, 0.0, 0.0, 1.0])).unwrap());
        let x = t.leaf_vector(&[3.0, -1.0]);
        let y = t.affine(m, x, None).unwrap();
        assert_eq!(t.value(y).as_slice(), &[3.0, -1.0]);

        let z = t.leaf(DenseArray::matrix(2, 2, vecf(&[0.0; 4])).unwrap());
        let y0 = t.affine(z, x, None).unwrap();
        assert_eq!(t.value(y0).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn affine_hand_case() {
        // [[1,2],[3,4]] * (1,1) = (3,7)
        let mut t = Tape::<f64>::new();
        let m = t.leaf(DenseArray::matrix(2, 2, vecf(&[1.0, 2.0, 3.0, 4.0])).unwrap());
        let x = t.leaf_vector(&[1.0, 1.0]);
        let y = t.affine(m, x, None).unwrap();
        assert_eq!(t.value(y).as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn affine_shape_mismatch() {
        let mut t = Tape::<f64>::new();
        let m = t.leaf(DenseArray::matrix(2, 3, vecf(&[0.0; 6])).unwrap());
        let x = t.leaf_vector(&[1.0, 1.0]);
        assert!(matches!(t.affine(m, x, None), Err(Error::Dimension { .. })));
    }

    #[test]
    fn sigmoid_values() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[0.0, 30.0, 1.0]);
        let y = t.sigmoid(x);
        let v = t.value(y).as_slice();
        assert_eq!(v[0], 0.5);
        assert!(v[1] > 1.0 - 1e-9 && v[1] < 1.0);
        // 1/(1+e^-1) to 10 decimal places
        assert_relative_eq!(v[2], 0.7310585786300049, epsilon = 1e-12);
    }

    #[test]
    fn sigmoid_grad_at_zero() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[0.0]);
        let y = t.sigmoid(x);
        let g = t.backward(y).unwrap();
        assert_relative_eq!(g.get(x).unwrap()[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn prelu_branches() {
        let mut t = Tape::<f64>::new();
        let slope = t.leaf_scalar(0.25);
        let x = t.leaf_vector(&[2.0, -2.0, 0.0]);
        let y = t.prelu(x, slope).unwrap();
        assert_eq!(t.value(y).as_slice(), &[2.0, -0.5, 0.0]);
    }

    #[test]
    fn prelu_grad_at_zero_takes_positive_branch() {
        let mut t = Tape::<f64>::new();
        let slope = t.leaf_scalar(0.25);
        let x = t.leaf_vector(&[0.0]);
        let y = t.prelu(x, slope).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap()[0], 1.0);
        assert!(g.get(slope).is_none() || g.get(slope).unwrap()[0] == 0.0);
    }

    #[test]
    fn softmax_uniform_and_analytic() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[0.0, 0.0, 0.0]);
        let y = t.softmax(x).unwrap();
        for &p in t.value(y).as_slice() {
            assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }

        let x2 = t.leaf_vector(&[(2.0f64).ln(), 0.0]);
        let y2 = t.softmax(x2).unwrap();
        let v = t.value(y2).as_slice();
        assert_relative_eq!(v[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf_vector(&[0.3, -1.2, 2.5]);
        let b = t.leaf_vector(&[0.3 + 7.0, -1.2 + 7.0, 2.5 + 7.0]);
        let ya = t.softmax(a).unwrap();
        let yb = t.softmax(b).unwrap();
        for (x, y) in t.value(ya).iter().zip(t.value(yb).iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_empty_is_error() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(DenseArray { shape: vec![0], data: vec![] });
        assert!(t.softmax(x).is_err());
    }

    #[test]
    fn l2_normalize_cases() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[3.0, 4.0]);
        let y = t.l2_normalize(x).unwrap();
        assert_eq!(t.value(y).as_slice(), &[0.6, 0.8]);

        let u = t.leaf_vector(&[1.0, 0.0]);
        let yu = t.l2_normalize(u).unwrap();
        assert_eq!(t.value(yu).as_slice(), &[1.0, 0.0]);

        let z = t.leaf_vector(&[0.0, 0.0]);
        assert!(matches!(t.l2_normalize(z), Err(Error::DegenerateNorm { .. })));
    }

    #[test]
    fn squared_norm_gradient() {
        // loss = |x|^2 at (1, 2) -> gradient (2, 4)
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[1.0, 2.0]);
        let loss = t.dot(x, x).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn cross_entropy_values() {
        let mut t = Tape::<f64>::new();
        // Near-certain logit for class 0: loss ~ 0
        let z = t.leaf_vector(&[50.0, 0.0, 0.0]);
        let l = t.cross_entropy(z, 0).unwrap();
        assert!(t.scalar_value(l) < 1e-9);

        let zu = t.leaf_vector(&[0.0, 0.0, 0.0]);
        let lu = t.cross_entropy(zu, 1).unwrap();
        assert_relative_eq!(t.scalar_value(lu), 3.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[1.0, 2.0]);
        let y = t.sigmoid(x);
        assert!(matches!(t.backward(y), Err(Error::NotScalar { .. })));
    }

    #[test]
    fn unused_nodes_report_zero() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vector(&[1.0]);
        let unused = t.leaf_vector(&[5.0, 6.0]);
        let y = t.sigmoid(x);
        let l = t.dot(y, y).unwrap();
        let mut g = t.backward(l).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.take(unused), vec![0.0, 0.0]);
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || {
            let mut t = Tape::<f64>::new();
            let x = t.leaf_vector(&[0.37, -1.4, 2.2]);
            let w = t.leaf(DenseArray::matrix(3, 3, vec![0.1, -0.2, 0.3, 0.5, 0.7, -0.11, 0.0, 1.5, -2.0]).unwrap());
            let h = t.affine(w, x, None).unwrap();
            let s = t.sigmoid(h);
            let n = t.l2_normalize(s).unwrap();
            let l = t.dot(n, s).unwrap();
            let g = t.backward(l).unwrap();
            (t.scalar_value(l).to_bits(), g.get(w).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dense_array_rejects_non_finite() {
        assert!(DenseArray::vector(vec![1.0, f64::NAN]).is_err());
        assert!(DenseArray::vector(vec![f64::INFINITY]).is_err());
    }
}
