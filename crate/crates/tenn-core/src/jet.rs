//! Forward jet algebra over the three spacetime inputs (t, x, y).
//!
//! A [`Jet3`] carries a value together with its partial derivatives up to a
//! configurable order (0..=3). Symmetric tensors are stored by unique entry:
//! 3 gradient components, 6 Hessian entries (i <= j), 10 third-order entries
//! (i <= j <= k), so index-permutation symmetry is structural.
//!
//! The free-function kernels (`jet_mul_into`, `jet_elem_into`, ...) operate on
//! raw component slices and are shared by the scalar `Jet3` operators and the
//! batched parameter graph, so there is a single implementation of the
//! Leibniz/Faa di Bruno rules in the crate.

use std::fmt;
use std::sync::OnceLock;

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 3;

/// Number of unique components carried at each order.
pub const N_COMPS: [usize; 4] = [1, 4, 10, 20];

/// Unique Hessian index pairs, lexicographic with i <= j.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Unique third-order index triples, lexicographic with i <= j <= k.
pub const TRIPLES: [(usize, usize, usize); 10] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 0, 2),
    (0, 1, 1),
    (0, 1, 2),
    (0, 2, 2),
    (1, 1, 1),
    (1, 1, 2),
    (1, 2, 2),
    (2, 2, 2),
];

/// Component offset of the Hessian entry for (i, j), any index order.
#[inline]
pub fn pair_comp(i: usize, j: usize) -> usize {
    const IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    4 + IDX[i][j]
}

/// Component offset of the third-order entry for (i, j, k), any index order.
#[inline]
pub fn triple_comp(i: usize, j: usize, k: usize) -> usize {
    let (a, b, c) = sort3(i, j, k);
    // position in TRIPLES
    const IDX: [[[usize; 3]; 3]; 3] = {
        let mut t = [[[usize::MAX; 3]; 3]; 3];
        let mut q = 0;
        while q < 10 {
            let (i, j, k) = TRIPLES[q];
            t[i][j][k] = q;
            q += 1;
        }
        t
    };
    10 + IDX[a][b][c]
}

#[inline]
fn sort3(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    if k <= lo {
        (k, lo, hi)
    } else if k <= hi {
        (lo, k, hi)
    } else {
        (lo, hi, k)
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Errors from jet construction and arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum JetError {
    /// Requested derivative order outside 0..=3.
    OrderOutOfRange { order: usize },
    /// Binary operation between jets of different carried orders.
    OrderMismatch { left: usize, right: usize },
    /// Division (or reciprocal) with a zero denominator value.
    Singularity { denominator: f64 },
    /// An operation required a higher carried order than available.
    InsufficientOrder { required: usize, actual: usize },
}

impl fmt::Display for JetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetError::OrderOutOfRange { order } => {
                write!(f, "jet order {order} outside supported range 0..=3")
            }
            JetError::OrderMismatch { left, right } => {
                write!(f, "jet order mismatch: {left} vs {right}")
            }
            JetError::Singularity { denominator } => {
                write!(f, "jet division by zero (denominator value {denominator})")
            }
            JetError::InsufficientOrder { required, actual } => {
                write!(f, "operation needs jets of order >= {required}, got {actual}")
            }
        }
    }
}

impl std::error::Error for JetError {}

// ---------------------------------------------------------------------------
// Elementary functions
// ---------------------------------------------------------------------------

/// Activation functions available to network hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ActivationKind {
    Sin,
    Tanh,
    Softplus,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] =
        [ActivationKind::Sin, ActivationKind::Tanh, ActivationKind::Softplus];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sin => "sin",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Softplus => "softplus",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sin" => Ok(ActivationKind::Sin),
            "tanh" => Ok(ActivationKind::Tanh),
            "softplus" => Ok(ActivationKind::Softplus),
            other => Err(format!("unknown activation '{other}' (expected sin|tanh|softplus)")),
        }
    }
}

/// Elementary scalar functions with derivative tables to order 4.
///
/// The table carries one order beyond [`MAX_ORDER`] because reverse-mode
/// adjoints of an order-3 composition differentiate the table once more.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElemFn {
    Act(ActivationKind),
    /// sin(2 pi v)
    Sin2Pi,
    /// cos(2 pi v)
    Cos2Pi,
    Neg,
    Scale(f64),
    /// 1 / v; the only member with a singular point.
    Recip,
}

const TWO_PI: f64 = std::f64::consts::TAU;

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

impl ElemFn {
    /// Whether the function is linear in its argument (handled without a table).
    #[inline]
    fn linear_factor(self) -> Option<f64> {
        match self {
            ElemFn::Neg => Some(-1.0),
            ElemFn::Scale(c) => Some(c),
            _ => None,
        }
    }

    /// f, f', f'', f''', f'''' at `v`.
    #[inline]
    pub fn table(self, v: f64) -> [f64; 5] {
        match self {
            ElemFn::Act(ActivationKind::Sin) => {
                let (s, c) = v.sin_cos();
                [s, c, -s, -c, s]
            }
            ElemFn::Act(ActivationKind::Tanh) => {
                let t = v.tanh();
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0), s * (16.0 * t - 24.0 * t * t * t)]
            }
            ElemFn::Act(ActivationKind::Softplus) => {
                let s = sigmoid(v);
                let d = s * (1.0 - s);
                let c = 1.0 - 2.0 * s;
                [softplus(v), s, d, d * c, d * c * c - 2.0 * d * d]
            }
            ElemFn::Sin2Pi => {
                let (s, c) = (TWO_PI * v).sin_cos();
                let w = TWO_PI;
                [s, w * c, -w * w * s, -w * w * w * c, w * w * w * w * s]
            }
            ElemFn::Cos2Pi => {
                let (s, c) = (TWO_PI * v).sin_cos();
                let w = TWO_PI;
                [c, -w * s, -w * w * c, w * w * w * s, w * w * w * w * c]
            }
            ElemFn::Recip => {
                let r = 1.0 / v;
                let r2 = r * r;
                [r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2, 24.0 * r2 * r2 * r]
            }
            ElemFn::Neg => [-v, -1.0, 0.0, 0.0, 0.0],
            ElemFn::Scale(c) => [c * v, c, 0.0, 0.0, 0.0],
        }
    }
}

// ---------------------------------------------------------------------------
// Leibniz product table
// ---------------------------------------------------------------------------

/// One term of the symmetrized Leibniz rule: out[out_c] += a[a_c] * b[b_c].
/// Repeated index splittings appear as repeated entries, so no coefficients
/// are needed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MulTerm {
    pub out_c: u8,
    pub a_c: u8,
    pub b_c: u8,
}

/// Terms grouped so that a prefix covers each order: PREFIX[o] is the number
/// of table entries whose output component exists at order o.
pub(crate) fn mul_table() -> &'static (Vec<MulTerm>, [usize; 4]) {
    static TABLE: OnceLock<(Vec<MulTerm>, [usize; 4])> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut terms = Vec::new();
        let t = |o: usize, a: usize, b: usize| MulTerm { out_c: o as u8, a_c: a as u8, b_c: b as u8 };
        terms.push(t(0, 0, 0));
        let p0 = terms.len();
        for i in 0..3 {
            terms.push(t(1 + i, 0, 1 + i));
            terms.push(t(1 + i, 1 + i, 0));
        }
        let p1 = terms.len();
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            let o = 4 + p;
            terms.push(t(o, 0, o));
            terms.push(t(o, 1 + i, 1 + j));
            terms.push(t(o, 1 + j, 1 + i));
            terms.push(t(o, o, 0));
        }
        let p2 = terms.len();
        for (q, &(i, j, k)) in TRIPLES.iter().enumerate() {
            let o = 10 + q;
            terms.push(t(o, 0, o));
            terms.push(t(o, 1 + i, pair_comp(j, k)));
            terms.push(t(o, 1 + j, pair_comp(i, k)));
            terms.push(t(o, 1 + k, pair_comp(i, j)));
            terms.push(t(o, pair_comp(j, k), 1 + i));
            terms.push(t(o, pair_comp(i, k), 1 + j));
            terms.push(t(o, pair_comp(i, j), 1 + k));
            terms.push(t(o, o, 0));
        }
        let p3 = terms.len();
        (terms, [p0, p1, p2, p3])
    })
}

// ---------------------------------------------------------------------------
// Raw component kernels (shared with the parameter graph)
// ---------------------------------------------------------------------------

/// out = a * b (Leibniz to `order`). `out` must be zeroed.
#[inline]
pub(crate) fn jet_mul_into(a: &[f64], b: &[f64], out: &mut [f64], order: usize) {
    let (terms, prefix) = mul_table();
    for t in &terms[..prefix[order]] {
        out[t.out_c as usize] += a[t.a_c as usize] * b[t.b_c as usize];
    }
}

/// Adjoint of `jet_mul_into`: given dL/d(out), accumulate dL/d(a), dL/d(b).
#[inline]
pub(crate) fn jet_mul_adjoint(
    zbar: &[f64],
    a: &[f64],
    b: &[f64],
    abar: &mut [f64],
    bbar: &mut [f64],
    order: usize,
) {
    let (terms, prefix) = mul_table();
    for t in &terms[..prefix[order]] {
        let z = zbar[t.out_c as usize];
        abar[t.a_c as usize] += z * b[t.b_c as usize];
        bbar[t.b_c as usize] += z * a[t.a_c as usize];
    }
}

/// out = a / b via triangular solve of the Leibniz identity a = out * b.
pub(crate) fn jet_div_into(a: &[f64], b: &[f64], out: &mut [f64], order: usize) -> Result<(), JetError> {
    if b[0] == 0.0 {
        return Err(JetError::Singularity { denominator: b[0] });
    }
    let (terms, prefix) = mul_table();
    let inv = 1.0 / b[0];
    let n = N_COMPS[order];
    let mut acc = [0.0f64; 20];
    for t in &terms[..prefix[order]] {
        // Terms are grouped by output component in increasing order, so by the
        // time we finalize out[c] every lower component is already solved.
        let (o, ac, bc) = (t.out_c as usize, t.a_c as usize, t.b_c as usize);
        if ac != o {
            acc[o] += out[ac] * b[bc];
        }
        // The (ac == o, bc == 0) term is the unknown; finalize when reached.
        if ac == o && bc == 0 {
            out[o] = (a[o] - acc[o]) * inv;
        }
    }
    debug_assert!(out[..n].iter().all(|v| !v.is_nan()) || a.iter().any(|v| v.is_nan()));
    Ok(())
}

/// out = f(a) by Faa di Bruno to `order`. `out` must be zeroed.
/// `tab` is `f.table(a[0])`.
#[inline]
pub(crate) fn jet_elem_into(tab: &[f64; 5], a: &[f64], out: &mut [f64], order: usize) {
    out[0] = tab[0];
    if order == 0 {
        return;
    }
    let (f1, f2, f3) = (tab[1], tab[2], tab[3]);
    for i in 0..3 {
        out[1 + i] = f1 * a[1 + i];
    }
    if order == 1 {
        return;
    }
    for (p, &(i, j)) in PAIRS.iter().enumerate() {
        out[4 + p] = f1 * a[4 + p] + f2 * a[1 + i] * a[1 + j];
    }
    if order == 2 {
        return;
    }
    for (q, &(i, j, k)) in TRIPLES.iter().enumerate() {
        let (gi, gj, gk) = (a[1 + i], a[1 + j], a[1 + k]);
        let (hjk, hik, hij) = (a[pair_comp(j, k)], a[pair_comp(i, k)], a[pair_comp(i, j)]);
        out[10 + q] = f1 * a[10 + q] + f2 * (gi * hjk + gj * hik + gk * hij) + f3 * gi * gj * gk;
    }
}

/// Adjoint of `jet_elem_into`. Uses the order-4 table entry: the highest
/// forward term is f'''(v) * g^3 and its value-sensitivity is f''''.
#[inline]
pub(crate) fn jet_elem_adjoint(
    tab: &[f64; 5],
    zbar: &[f64],
    a: &[f64],
    abar: &mut [f64],
    order: usize,
) {
    let (f1, f2, f3, f4) = (tab[1], tab[2], tab[3], tab[4]);
    abar[0] += f1 * zbar[0];
    if order == 0 {
        return;
    }
    for i in 0..3 {
        let z = zbar[1 + i];
        abar[0] += z * f2 * a[1 + i];
        abar[1 + i] += z * f1;
    }
    if order == 1 {
        return;
    }
    for (p, &(i, j)) in PAIRS.iter().enumerate() {
        let z = zbar[4 + p];
        abar[0] += z * (f2 * a[4 + p] + f3 * a[1 + i] * a[1 + j]);
        abar[1 + i] += z * f2 * a[1 + j];
        abar[1 + j] += z * f2 * a[1 + i];
        abar[4 + p] += z * f1;
    }
    if order == 2 {
        return;
    }
    for (q, &(i, j, k)) in TRIPLES.iter().enumerate() {
        let z = zbar[10 + q];
        let (gi, gj, gk) = (a[1 + i], a[1 + j], a[1 + k]);
        let (pjk, pik, pij) = (pair_comp(j, k), pair_comp(i, k), pair_comp(i, j));
        let (hjk, hik, hij) = (a[pjk], a[pik], a[pij]);
        abar[0] += z * (f2 * a[10 + q] + f3 * (gi * hjk + gj * hik + gk * hij) + f4 * gi * gj * gk);
        abar[1 + i] += z * (f2 * hjk + f3 * gj * gk);
        abar[1 + j] += z * (f2 * hik + f3 * gi * gk);
        abar[1 + k] += z * (f2 * hij + f3 * gi * gj);
        abar[pjk] += z * f2 * gi;
        abar[pik] += z * f2 * gj;
        abar[pij] += z * f2 * gk;
        abar[10 + q] += z * f1;
    }
}

/// out = d(a)/d(axis): a jet of order `in_order - 1` whose entries are a's
/// entries with `axis` inserted. A pure gather of unique entries.
#[inline]
pub(crate) fn jet_deriv_into(a: &[f64], axis: usize, out: &mut [f64], in_order: usize) {
    debug_assert!(in_order >= 1);
    out[0] = a[1 + axis];
    if in_order == 1 {
        return;
    }
    for m in 0..3 {
        out[1 + m] = a[pair_comp(axis, m)];
    }
    if in_order == 2 {
        return;
    }
    for (p, &(m, n)) in PAIRS.iter().enumerate() {
        out[4 + p] = a[triple_comp(axis, m, n)];
    }
}

/// Adjoint of `jet_deriv_into`: scatter back along the gather map.
#[inline]
pub(crate) fn jet_deriv_adjoint(zbar: &[f64], axis: usize, abar: &mut [f64], in_order: usize) {
    abar[1 + axis] += zbar[0];
    if in_order == 1 {
        return;
    }
    for m in 0..3 {
        abar[pair_comp(axis, m)] += zbar[1 + m];
    }
    if in_order == 2 {
        return;
    }
    for (p, &(m, n)) in PAIRS.iter().enumerate() {
        abar[triple_comp(axis, m, n)] += zbar[4 + p];
    }
}

// ---------------------------------------------------------------------------
// Jet3
// ---------------------------------------------------------------------------

/// A value with partial derivatives to `order` with respect to (t, x, y).
///
/// Entries above the carried order are zero and are never read by any
/// operation, so computing at order k and reading entries <= k is
/// bit-identical to computing at order 3.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet3 {
    order: u8,
    comps: [f64; 20],
}

impl fmt::Debug for Jet3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet3(order={}, value={}", self.order, self.comps[0])?;
        if self.order >= 1 {
            write!(f, ", grad={:?}", &self.comps[1..4])?;
        }
        if self.order >= 2 {
            write!(f, ", hess={:?}", &self.comps[4..10])?;
        }
        if self.order >= 3 {
            write!(f, ", third={:?}", &self.comps[10..20])?;
        }
        write!(f, ")")
    }
}

impl Jet3 {
    /// A constant: value `v`, all derivatives zero.
    pub fn constant(v: f64, order: usize) -> Jet3 {
        assert!(order <= MAX_ORDER, "jet order {order} out of range");
        let mut comps = [0.0; 20];
        comps[0] = v;
        Jet3 { order: order as u8, comps }
    }

    pub(crate) fn from_comps(comps: &[f64], order: usize) -> Jet3 {
        let mut c = [0.0; 20];
        c[..N_COMPS[order]].copy_from_slice(&comps[..N_COMPS[order]]);
        Jet3 { order: order as u8, comps: c }
    }

    /// Build a jet from raw unique components: value, then gradient, Hessian
    /// entries (i <= j), and third-order entries (i <= j <= k), exactly
    /// `N_COMPS[order]` values.
    pub fn from_parts(comps: &[f64], order: usize) -> Result<Jet3, JetError> {
        if order > MAX_ORDER {
            return Err(JetError::OrderOutOfRange { order });
        }
        assert_eq!(comps.len(), N_COMPS[order], "component count for order {order}");
        Ok(Jet3::from_comps(comps, order))
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.comps[0]
    }

    /// d/d(axis); axis 0 = t, 1 = x, 2 = y.
    #[inline]
    pub fn grad(&self, axis: usize) -> f64 {
        self.comps[1 + axis]
    }

    /// Second partial; symmetric in (i, j).
    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.comps[pair_comp(i, j)]
    }

    /// Third partial; symmetric under all index permutations.
    #[inline]
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.comps[triple_comp(i, j, k)]
    }

    #[inline]
    pub(crate) fn comps(&self) -> &[f64] {
        &self.comps[..N_COMPS[self.order()]]
    }

    /// Same jet truncated to a lower carried order.
    pub fn truncate(&self, order: usize) -> Jet3 {
        assert!(order <= self.order());
        Jet3::from_comps(&self.comps, order)
    }

    /// True if every carried entry is finite.
    pub fn is_finite(&self) -> bool {
        self.comps().iter().all(|v| v.is_finite())
    }

    /// Jet of the partial derivative along `axis`, at order one less.
    pub fn deriv(&self, axis: usize) -> Result<Jet3, JetError> {
        if self.order() < 1 {
            return Err(JetError::InsufficientOrder { required: 1, actual: 0 });
        }
        let mut out = [0.0; 20];
        jet_deriv_into(self.comps(), axis, &mut out, self.order());
        Ok(Jet3 { order: self.order - 1, comps: out })
    }

    pub fn recip(&self) -> Result<Jet3, JetError> {
        jet_elementwise(ElemFn::Recip, self)
    }

    fn check_order(&self, rhs: &Jet3) {
        assert_eq!(
            self.order, rhs.order,
            "jet order mismatch: {} vs {}",
            self.order, rhs.order
        );
    }
}

impl std::ops::Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        self.check_order(&rhs);
        let mut out = self;
        for (o, r) in out.comps.iter_mut().zip(rhs.comps.iter()) {
            *o += r;
        }
        out
    }
}

impl std::ops::Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        self.check_order(&rhs);
        let mut out = self;
        for (o, r) in out.comps.iter_mut().zip(rhs.comps.iter()) {
            *o -= r;
        }
        out
    }
}

impl std::ops::Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        self.check_order(&rhs);
        let mut out = [0.0; 20];
        jet_mul_into(self.comps(), rhs.comps(), &mut out, self.order());
        Jet3 { order: self.order, comps: out }
    }
}

impl std::ops::Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        let mut out = self;
        for c in out.comps.iter_mut() {
            *c = -*c;
        }
        out
    }
}

impl std::ops::Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: f64) -> Jet3 {
        let mut out = self;
        for c in out.comps.iter_mut() {
            *c *= rhs;
        }
        out
    }
}

/// Kinds accepted by [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithKind {
    Add,
    Sub,
    Mul,
    Div,
}

/// Seed input jets for a spacetime point: jet i carries value point[i] and
/// gradient e_i, with all higher entries zero.
pub fn jet_seed_inputs(point: [f64; 3], order: usize) -> Result<[Jet3; 3], JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderOutOfRange { order });
    }
    let mut jets = [Jet3::constant(0.0, order); 3];
    for (i, jet) in jets.iter_mut().enumerate() {
        jet.comps[0] = point[i];
        if order >= 1 {
            jet.comps[1 + i] = 1.0;
        }
    }
    Ok(jets)
}

/// Binary jet arithmetic with explicit error reporting.
pub fn jet_arith(kind: ArithKind, a: &Jet3, b: &Jet3) -> Result<Jet3, JetError> {
    if a.order != b.order {
        return Err(JetError::OrderMismatch { left: a.order(), right: b.order() });
    }
    match kind {
        ArithKind::Add => Ok(*a + *b),
        ArithKind::Sub => Ok(*a - *b),
        ArithKind::Mul => Ok(*a * *b),
        ArithKind::Div => {
            let mut out = [0.0; 20];
            jet_div_into(a.comps(), b.comps(), &mut out, a.order())?;
            Ok(Jet3 { order: a.order, comps: out })
        }
    }
}

/// Apply an elementary function through the chain rule at the carried order.
pub fn jet_elementwise(f: ElemFn, a: &Jet3) -> Result<Jet3, JetError> {
    if let Some(c) = f.linear_factor() {
        return Ok(*a * c);
    }
    if matches!(f, ElemFn::Recip) && a.value() == 0.0 {
        return Err(JetError::Singularity { denominator: 0.0 });
    }
    let tab = f.table(a.value());
    let mut out = [0.0; 20];
    jet_elem_into(&tab, a.comps(), &mut out, a.order());
    Ok(Jet3 { order: a.order, comps: out })
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Worst relative mismatch per derivative order between a jet and recursive
/// central differences of the jet's value.
#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub grad: f64,
    pub hess: f64,
    pub third: f64,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        self.grad.max(self.hess).max(self.third)
    }
}

fn central_diff(f: &dyn Fn([f64; 3]) -> f64, p: [f64; 3], axes: &[usize], h: f64) -> f64 {
    match axes.split_first() {
        None => f(p),
        Some((&ax, rest)) => {
            let mut hi = p;
            hi[ax] += h;
            let mut lo = p;
            lo[ax] -= h;
            (central_diff(f, hi, rest, h) - central_diff(f, lo, rest, h)) / (2.0 * h)
        }
    }
}

/// Compare a jet's derivative entries against central differences.
///
/// The mismatch for each order group is max |jet - fd| / scale, where scale is
/// the largest entry magnitude in the group with an absolute floor of 1e-8.
/// Powers of two for `h` keep dyadic evaluation points exact.
pub fn finite_diff_report(f: &dyn Fn([f64; 3]) -> Jet3, point: [f64; 3], h: f64) -> FdReport {
    let jet = f(point);
    let order = jet.order();
    let value = |p: [f64; 3]| f(p).value();
    let mut report = FdReport::default();

    let group = |pairs: &[(f64, f64)]| -> f64 {
        let scale = pairs
            .iter()
            .map(|&(a, b)| a.abs().max(b.abs()))
            .fold(1e-8f64, f64::max);
        pairs.iter().map(|&(a, b)| (a - b).abs() / scale).fold(0.0f64, f64::max)
    };

    if order >= 1 {
        let pairs: Vec<(f64, f64)> = (0..3)
            .map(|i| (jet.grad(i), central_diff(&value, point, &[i], h)))
            .collect();
        report.grad = group(&pairs);
    }
    if order >= 2 {
        let pairs: Vec<(f64, f64)> = PAIRS
            .iter()
            .map(|&(i, j)| (jet.hess(i, j), central_diff(&value, point, &[i, j], h)))
            .collect();
        report.hess = group(&pairs);
    }
    if order >= 3 {
        let pairs: Vec<(f64, f64)> = TRIPLES
            .iter()
            .map(|&(i, j, k)| (jet.third(i, j, k), central_diff(&value, point, &[i, j, k], h)))
            .collect();
        report.third = group(&pairs);
    }
    report
}

/// Maximum relative mismatch across all carried derivative orders.
pub fn finite_diff_check(f: &dyn Fn([f64; 3]) -> Jet3, point: [f64; 3], h: f64) -> f64 {
    finite_diff_report(f, point, h).max()
}
