//! Exact polynomial calculus on charts of `R^n`.
//!
//! Polynomials with rational coefficients, polynomial differential forms and
//! multivector fields, the exterior derivative, interior products, Lie
//! derivatives, pullback along polynomial maps and the Schouten bracket.
//!
//! Conventions: a multivector `P` is evaluated on covectors by
//! `P(a_1, ..., a_k) = sum_I P_I det[a_r(e_{i_s})]`, and the Schouten bracket
//! satisfies `[X, f] = X(f)` and `[pi, pi](df, dg, dh) = 2 * cyclic pi(df, d pi(dg, dh))`.

use crate::exactla::{q, Q, QMat};
use num::{One, Signed, Zero};
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Highest degree a form may have unless it exceeds the chart dimension.
pub const FORM_DEGREE_CAP: usize = 4;
/// Highest degree a multivector may have unless it exceeds the chart dimension.
pub const MULTIVECTOR_DEGREE_CAP: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("{kind} of degree {degree} exceeds the cap {cap}")]
    DegreeCap { kind: &'static str, degree: usize, cap: usize },
    #[error("chart dimension mismatch: expected {expected}, found {found}")]
    ChartMismatch { expected: usize, found: usize },
}

/// Polynomial in `n` variables with rational coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| if k == 1 { format!("x{i}") } else { format!("x{i}^{k}") })
                    .collect();
                if mono.is_empty() {
                    c.to_string()
                } else {
                    format!("{}*{}", c, mono.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Q) -> Self {
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(vec![0; n], c);
        }
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, Q::one())
    }

    /// The coordinate function `x_i`.
    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.terms.insert(e, Q::one());
        p
    }

    pub fn monomial(n: usize, exps: &[u32], c: Q) -> Self {
        assert_eq!(exps.len(), n);
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(exps.to_vec(), c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Largest exponent of any single variable.
    pub fn max_var_degree(&self) -> u32 {
        self.terms.keys().flat_map(|e| e.iter().copied()).max().unwrap_or(0)
    }

    fn add_term(&mut self, e: Vec<u32>, c: Q) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = o.get().clone() + c;
                if v.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.n, o.n, "polynomial variable count");
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly { n: self.n, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    pub fn scale(&self, s: &Q) -> Poly {
        if s.is_zero() {
            return Poly::zero(self.n);
        }
        Poly { n: self.n, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.n, o.n, "polynomial variable count");
        let mut r = Poly::zero(self.n);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_term(e, c1 * c2);
            }
        }
        r
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::one(self.n), |acc, _| acc.mul(self))
    }

    /// Partial derivative with respect to `x_i`.
    pub fn deriv(&self, i: usize) -> Poly {
        let mut r = Poly::zero(self.n);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            r.add_term(e2, c * q(e[i] as i64));
        }
        r
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        assert_eq!(x.len(), self.n, "evaluation point length");
        let mut s = Q::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t *= num::pow(xi.clone(), k as usize);
                }
            }
            s += t;
        }
        s
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter().zip(x).fold(crate::exactla::to_f64(c), |t, (&k, &xi)| t * xi.powi(k as i32))
            })
            .sum()
    }

    /// Substitute `x_i := subs[i]`; the result lives in the variables of `subs`.
    pub fn compose(&self, subs: &[Poly]) -> Poly {
        assert_eq!(subs.len(), self.n, "substitution length");
        let m = subs.first().map(|p| p.n).unwrap_or(0);
        let mut r = Poly::zero(m);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(m, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&subs[i].pow(k));
                }
            }
            r = r.add(&t);
        }
        r
    }

    /// Random polynomial with small rational coefficients and total degree at most `deg`.
    pub fn random<R: Rng>(n: usize, deg: u32, rng: &mut R) -> Poly {
        let mut p = Poly::zero(n);
        for e in exponents_up_to(n, deg) {
            if rng.gen_bool(0.6) {
                p.add_term(e, random_q(rng));
            }
        }
        p
    }
}

/// Small random rational, nonzero with high probability.
pub fn random_q<R: Rng>(rng: &mut R) -> Q {
    let num = rng.gen_range(-4i64..=4);
    let den = rng.gen_range(1i64..=3);
    crate::exactla::qf(num, den)
}

/// All exponent vectors in `n` variables of total degree at most `deg`.
pub fn exponents_up_to(n: usize, deg: u32) -> Vec<Vec<u32>> {
    fn rec(i: usize, n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(i + 1, n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, deg, &mut Vec::new(), &mut out);
    out
}

/// Polynomial vector field, `X = sum X^i d/dx_i`.
pub type VectorField = Vec<Poly>;
/// Polynomial 1-form in components, `a = sum a_i dx_i`.
pub type OneForm = Vec<Poly>;

pub fn vf_zero(n: usize) -> VectorField {
    vec![Poly::zero(n); n]
}

/// `X(f)`.
pub fn vf_apply(x: &[Poly], f: &Poly) -> Poly {
    x.iter().enumerate().fold(Poly::zero(f.n), |s, (i, xi)| if xi.is_zero() { s } else { s.add(&xi.mul(&f.deriv(i))) })
}

/// Lie bracket of vector fields.
pub fn vf_bracket(x: &[Poly], y: &[Poly]) -> VectorField {
    (0..x.len()).map(|j| vf_apply(x, &y[j]).sub(&vf_apply(y, &x[j]))).collect()
}

pub fn vec_add(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

pub fn vec_sub(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

pub fn vec_mul(f: &Poly, a: &[Poly]) -> Vec<Poly> {
    a.iter().map(|x| f.mul(x)).collect()
}

pub fn vec_scale(s: &Q, a: &[Poly]) -> Vec<Poly> {
    a.iter().map(|x| x.scale(s)).collect()
}

pub fn vec_is_zero(a: &[Poly]) -> bool {
    a.iter().all(Poly::is_zero)
}

pub fn vec_eval(a: &[Poly], x: &[Q]) -> Vec<Q> {
    a.iter().map(|p| p.eval(x)).collect()
}

/// `a(X)` for a 1-form and a vector field.
pub fn pair_form_vf(a: &[Poly], x: &[Poly]) -> Poly {
    let n = a.first().map(|p| p.n).unwrap_or(0);
    a.iter().zip(x).fold(Poly::zero(n), |s, (ai, xi)| s.add(&ai.mul(xi)))
}

/// Constant vector in polynomial form.
pub fn const_vec(n: usize, v: &[Q]) -> Vec<Poly> {
    v.iter().map(|c| Poly::constant(n, c.clone())).collect()
}

/// Sign of the permutation sorting `a ++ b` for disjoint sorted index sets, or `None` if they overlap.
pub fn merge_sign(a: &[usize], b: &[usize]) -> Option<(i32, Vec<usize>)> {
    let mut inversions = 0usize;
    for x in a {
        for y in b {
            if x == y {
                return None;
            }
            if x > y {
                inversions += 1;
            }
        }
    }
    let mut m: Vec<usize> = a.iter().chain(b).copied().collect();
    m.sort_unstable();
    Some((if inversions % 2 == 0 { 1 } else { -1 }, m))
}

fn det_q(m: &QMat) -> Q {
    if m.rows == 0 {
        Q::one()
    } else {
        m.det()
    }
}

/// Antisymmetric tensor field with polynomial coefficients on sorted index sets.
#[derive(Clone, PartialEq, Eq)]
struct Alt {
    n: usize,
    k: usize,
    comps: BTreeMap<Vec<usize>, Poly>,
}

impl Alt {
    fn zero(n: usize, k: usize) -> Self {
        Alt { n, k, comps: BTreeMap::new() }
    }

    fn add_comp(&mut self, idx: Vec<usize>, p: Poly) {
        if p.is_zero() {
            return;
        }
        let cur = self.comps.remove(&idx).unwrap_or_else(|| Poly::zero(self.n));
        let s = cur.add(&p);
        if !s.is_zero() {
            self.comps.insert(idx, s);
        }
    }

    fn add(&self, o: &Alt) -> Alt {
        assert_eq!((self.n, self.k), (o.n, o.k), "degree or chart mismatch");
        let mut r = self.clone();
        for (i, p) in &o.comps {
            r.add_comp(i.clone(), p.clone());
        }
        r
    }

    fn scale_poly(&self, f: &Poly) -> Alt {
        let mut r = Alt::zero(self.n, self.k);
        for (i, p) in &self.comps {
            r.add_comp(i.clone(), p.mul(f));
        }
        r
    }

    fn wedge(&self, o: &Alt) -> Alt {
        let mut r = Alt::zero(self.n, self.k + o.k);
        for (i, p) in &self.comps {
            for (j, g) in &o.comps {
                if let Some((s, m)) = merge_sign(i, j) {
                    r.add_comp(m, p.mul(g).scale(&q(s as i64)));
                }
            }
        }
        r
    }

    /// Contract the first slot with a 1-tensor of the dual kind.
    fn contract(&self, v: &[Poly]) -> Alt {
        let mut r = Alt::zero(self.n, self.k.saturating_sub(1));
        if self.k == 0 {
            return r;
        }
        for (idx, p) in &self.comps {
            for (a, &i) in idx.iter().enumerate() {
                if v[i].is_zero() {
                    continue;
                }
                let mut rest = idx.clone();
                rest.remove(a);
                let sign = if a % 2 == 0 { Q::one() } else { -Q::one() };
                r.add_comp(rest, p.mul(&v[i]).scale(&sign));
            }
        }
        r
    }

    fn eval(&self, x: &[Q], vecs: &[Vec<Q>]) -> Q {
        assert_eq!(vecs.len(), self.k, "argument count");
        let mut s = Q::zero();
        for (idx, p) in &self.comps {
            let mut m = QMat::zeros(self.k, self.k);
            for (r, v) in vecs.iter().enumerate() {
                for (c, &i) in idx.iter().enumerate() {
                    m[(r, c)] = v[i].clone();
                }
            }
            let d = det_q(&m);
            if !d.is_zero() {
                s += p.eval(x) * d;
            }
        }
        s
    }

    fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }
}

fn check_cap(kind: &'static str, n: usize, k: usize, cap: usize) -> Result<(), PolyError> {
    if k > cap && k <= n {
        Err(PolyError::DegreeCap { kind, degree: k, cap })
    } else {
        Ok(())
    }
}

/// Polynomial differential form of fixed degree.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyForm(Alt);

impl fmt::Debug for PolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-form on R^{}: ", self.0.k, self.0.n)?;
        f.debug_map().entries(self.0.comps.iter()).finish()
    }
}

impl PolyForm {
    pub fn zero(n: usize, k: usize) -> Result<Self, PolyError> {
        check_cap("form", n, k, FORM_DEGREE_CAP)?;
        Ok(PolyForm(Alt::zero(n, k)))
    }

    /// Form from components on increasing index tuples.
    pub fn from_components(n: usize, k: usize, comps: &[(Vec<usize>, Poly)]) -> Result<Self, PolyError> {
        let mut f = Self::zero(n, k)?;
        for (idx, p) in comps {
            assert_eq!(idx.len(), k, "index tuple length");
            if p.n != n {
                return Err(PolyError::ChartMismatch { expected: n, found: p.n });
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() < k {
                continue;
            }
            let perm_sign = permutation_sign(idx);
            f.0.add_comp(sorted, p.scale(&q(perm_sign as i64)));
        }
        Ok(f)
    }

    pub fn function(f: Poly) -> Self {
        let n = f.n;
        let mut a = Alt::zero(n, 0);
        a.add_comp(vec![], f);
        PolyForm(a)
    }

    pub fn one_form(a: &[Poly]) -> Self {
        let n = a.len();
        let mut r = Alt::zero(n, 1);
        for (i, p) in a.iter().enumerate() {
            r.add_comp(vec![i], p.clone());
        }
        PolyForm(r)
    }

    /// Components of a 1-form.
    pub fn one_form_comps(&self) -> OneForm {
        assert_eq!(self.0.k, 1, "not a 1-form");
        (0..self.0.n).map(|i| self.0.comps.get(&vec![i]).cloned().unwrap_or_else(|| Poly::zero(self.0.n))).collect()
    }

    /// Coefficient function of a 0-form.
    pub fn as_function(&self) -> Poly {
        assert_eq!(self.0.k, 0, "not a function");
        self.0.comps.get(&vec![]).cloned().unwrap_or_else(|| Poly::zero(self.0.n))
    }

    /// Coefficient on the increasing index tuple `idx`.
    pub fn component(&self, idx: &[usize]) -> Poly {
        self.0.comps.get(idx).cloned().unwrap_or_else(|| Poly::zero(self.0.n))
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &Poly)> {
        self.0.comps.iter()
    }

    pub fn degree(&self) -> usize {
        self.0.k
    }

    pub fn chart_dim(&self) -> usize {
        self.0.n
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, o: &PolyForm) -> PolyForm {
        PolyForm(self.0.add(&o.0))
    }

    pub fn sub(&self, o: &PolyForm) -> PolyForm {
        PolyForm(self.0.add(&o.neg().0))
    }

    pub fn neg(&self) -> PolyForm {
        self.scale(&-Q::one())
    }

    pub fn scale(&self, s: &Q) -> PolyForm {
        PolyForm(self.0.scale_poly(&Poly::constant(self.0.n, s.clone())))
    }

    pub fn mul_fn(&self, f: &Poly) -> PolyForm {
        PolyForm(self.0.scale_poly(f))
    }

    pub fn wedge(&self, o: &PolyForm) -> Result<PolyForm, PolyError> {
        check_cap("form", self.0.n, self.0.k + o.0.k, FORM_DEGREE_CAP)?;
        Ok(PolyForm(self.0.wedge(&o.0)))
    }

    /// Exterior derivative.
    pub fn d(&self) -> Result<PolyForm, PolyError> {
        let n = self.0.n;
        check_cap("form", n, self.0.k + 1, FORM_DEGREE_CAP)?;
        let mut r = Alt::zero(n, self.0.k + 1);
        for (idx, p) in &self.0.comps {
            for i in 0..n {
                if let Some((s, m)) = merge_sign(&[i], idx) {
                    r.add_comp(m, p.deriv(i).scale(&q(s as i64)));
                }
            }
        }
        Ok(PolyForm(r))
    }

    /// Interior product `i_X`.
    pub fn interior(&self, x: &[Poly]) -> PolyForm {
        PolyForm(self.0.contract(x))
    }

    /// Lie derivative by Cartan's formula.
    pub fn lie(&self, x: &[Poly]) -> Result<PolyForm, PolyError> {
        let a = self.d()?.interior(x);
        if self.0.k == 0 {
            return Ok(a);
        }
        Ok(a.add(&self.interior(x).d()?))
    }

    /// Value at a point on the given tangent vectors.
    pub fn eval(&self, x: &[Q], vecs: &[Vec<Q>]) -> Q {
        self.0.eval(x, vecs)
    }

    /// Pullback along the polynomial map whose components are `phi` (target coordinates as functions of source coordinates).
    pub fn pullback(&self, phi: &[Poly]) -> Result<PolyForm, PolyError> {
        if phi.len() != self.0.n {
            return Err(PolyError::ChartMismatch { expected: self.0.n, found: phi.len() });
        }
        let m = phi.first().map(|p| p.n).unwrap_or(0);
        let k = self.0.k;
        check_cap("form", m, k, FORM_DEGREE_CAP)?;
        let dphi: Vec<Alt> = phi
            .iter()
            .map(|p| {
                let mut a = Alt::zero(m, 1);
                for j in 0..m {
                    a.add_comp(vec![j], p.deriv(j));
                }
                a
            })
            .collect();
        let mut r = Alt::zero(m, k);
        for (idx, p) in &self.0.comps {
            let mut acc = Alt::zero(m, 0);
            acc.add_comp(vec![], p.compose(phi));
            for &i in idx {
                acc = acc.wedge(&dphi[i]);
            }
            r = r.add(&acc);
        }
        Ok(PolyForm(r))
    }

    /// Random form with polynomial coefficients of total degree at most `deg`.
    pub fn random<R: Rng>(n: usize, k: usize, deg: u32, rng: &mut R) -> Result<PolyForm, PolyError> {
        let mut f = Self::zero(n, k)?;
        for idx in index_sets(n, k) {
            f.0.add_comp(idx, Poly::random(n, deg, rng));
        }
        Ok(f)
    }
}

/// Polynomial multivector field of fixed degree.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyMultivector(Alt);

impl fmt::Debug for PolyMultivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-vector on R^{}: ", self.0.k, self.0.n)?;
        f.debug_map().entries(self.0.comps.iter()).finish()
    }
}

impl PolyMultivector {
    pub fn zero(n: usize, k: usize) -> Result<Self, PolyError> {
        check_cap("multivector", n, k, MULTIVECTOR_DEGREE_CAP)?;
        Ok(PolyMultivector(Alt::zero(n, k)))
    }

    pub fn from_components(n: usize, k: usize, comps: &[(Vec<usize>, Poly)]) -> Result<Self, PolyError> {
        let mut f = Self::zero(n, k)?;
        for (idx, p) in comps {
            assert_eq!(idx.len(), k, "index tuple length");
            if p.n != n {
                return Err(PolyError::ChartMismatch { expected: n, found: p.n });
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() < k {
                continue;
            }
            f.0.add_comp(sorted, p.scale(&q(permutation_sign(idx) as i64)));
        }
        Ok(f)
    }

    pub fn function(f: Poly) -> Self {
        let n = f.n;
        let mut a = Alt::zero(n, 0);
        a.add_comp(vec![], f);
        PolyMultivector(a)
    }

    pub fn vector_field(x: &[Poly]) -> Self {
        let n = x.len();
        let mut r = Alt::zero(n, 1);
        for (i, p) in x.iter().enumerate() {
            r.add_comp(vec![i], p.clone());
        }
        PolyMultivector(r)
    }

    /// Bivector from an antisymmetric matrix of polynomials `pi[i][j] = pi(dx_i, dx_j)`.
    pub fn bivector_from_matrix(pi: &[Vec<Poly>]) -> Self {
        let n = pi.len();
        let mut r = Alt::zero(n, 2);
        for i in 0..n {
            for j in i + 1..n {
                r.add_comp(vec![i, j], pi[i][j].clone());
            }
        }
        PolyMultivector(r)
    }

    /// Matrix `pi(dx_i, dx_j)` of a bivector.
    pub fn bivector_matrix(&self) -> Vec<Vec<Poly>> {
        assert_eq!(self.0.k, 2, "not a bivector");
        let n = self.0.n;
        let mut m = vec![vec![Poly::zero(n); n]; n];
        for (idx, p) in &self.0.comps {
            m[idx[0]][idx[1]] = p.clone();
            m[idx[1]][idx[0]] = p.neg();
        }
        m
    }

    pub fn vector_comps(&self) -> VectorField {
        assert_eq!(self.0.k, 1, "not a vector field");
        (0..self.0.n).map(|i| self.0.comps.get(&vec![i]).cloned().unwrap_or_else(|| Poly::zero(self.0.n))).collect()
    }

    pub fn as_function(&self) -> Poly {
        assert_eq!(self.0.k, 0, "not a function");
        self.0.comps.get(&vec![]).cloned().unwrap_or_else(|| Poly::zero(self.0.n))
    }

    pub fn component(&self, idx: &[usize]) -> Poly {
        self.0.comps.get(idx).cloned().unwrap_or_else(|| Poly::zero(self.0.n))
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &Poly)> {
        self.0.comps.iter()
    }

    pub fn degree(&self) -> usize {
        self.0.k
    }

    pub fn chart_dim(&self) -> usize {
        self.0.n
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        PolyMultivector(self.0.add(&o.0))
    }

    pub fn sub(&self, o: &Self) -> Self {
        PolyMultivector(self.0.add(&o.neg().0))
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    pub fn scale(&self, s: &Q) -> Self {
        PolyMultivector(self.0.scale_poly(&Poly::constant(self.0.n, s.clone())))
    }

    pub fn mul_fn(&self, f: &Poly) -> Self {
        PolyMultivector(self.0.scale_poly(f))
    }

    pub fn wedge(&self, o: &Self) -> Result<Self, PolyError> {
        check_cap("multivector", self.0.n, self.0.k + o.0.k, MULTIVECTOR_DEGREE_CAP)?;
        Ok(PolyMultivector(self.0.wedge(&o.0)))
    }

    /// Contraction of the first slot with a 1-form.
    pub fn contract(&self, a: &[Poly]) -> Self {
        PolyMultivector(self.0.contract(a))
    }

    /// `pi^sharp(a) = pi(a, .)` for a bivector.
    pub fn sharp(&self, a: &[Poly]) -> VectorField {
        assert_eq!(self.0.k, 2, "sharp needs a bivector");
        self.contract(a).vector_comps()
    }

    /// Value at a point on covectors.
    pub fn eval(&self, x: &[Q], covecs: &[Vec<Q>]) -> Q {
        self.0.eval(x, covecs)
    }

    /// Evaluate on polynomial 1-forms, giving a polynomial.
    pub fn eval_forms(&self, forms: &[OneForm]) -> Poly {
        assert_eq!(forms.len(), self.0.k, "argument count");
        let mut r = self.clone();
        for a in forms {
            r = r.contract(a);
        }
        r.as_function()
    }

    /// Schouten bracket.
    pub fn schouten(&self, o: &Self) -> Result<Self, PolyError> {
        let n = self.0.n;
        if o.0.n != n {
            return Err(PolyError::ChartMismatch { expected: n, found: o.0.n });
        }
        let deg = (self.0.k + o.0.k).checked_sub(1);
        let Some(deg) = deg else {
            return Ok(PolyMultivector(Alt::zero(n, 0)));
        };
        check_cap("multivector", n, deg, MULTIVECTOR_DEGREE_CAP)?;
        let mut r = Alt::zero(n, deg);
        // sum_i (d_r P / d theta_i)(d Q / d x_i) - (d P / d x_i)(d_l Q / d theta_i)
        for (ip, p) in &self.0.comps {
            for (iq, g) in &o.0.comps {
                for i in 0..n {
                    if let Some(a) = ip.iter().position(|&t| t == i) {
                        let dg = g.deriv(i);
                        if !dg.is_zero() {
                            let mut rest = ip.clone();
                            rest.remove(a);
                            let s_r = if (ip.len() - 1 - a) % 2 == 0 { 1 } else { -1 };
                            if let Some((s, m)) = merge_sign(&rest, iq) {
                                r.add_comp(m, p.mul(&dg).scale(&q((s * s_r) as i64)));
                            }
                        }
                    }
                    if let Some(b) = iq.iter().position(|&t| t == i) {
                        let dp = p.deriv(i);
                        if !dp.is_zero() {
                            let mut rest = iq.clone();
                            rest.remove(b);
                            let s_l = if b % 2 == 0 { 1 } else { -1 };
                            if let Some((s, m)) = merge_sign(ip, &rest) {
                                r.add_comp(m, dp.mul(g).scale(&q((-s * s_l) as i64)));
                            }
                        }
                    }
                }
            }
        }
        Ok(PolyMultivector(r))
    }

    /// Lie derivative `L_X P = [X, P]`.
    pub fn lie(&self, x: &[Poly]) -> Result<Self, PolyError> {
        PolyMultivector::vector_field(x).schouten(self)
    }

    pub fn random<R: Rng>(n: usize, k: usize, deg: u32, rng: &mut R) -> Result<Self, PolyError> {
        let mut f = Self::zero(n, k)?;
        for idx in index_sets(n, k) {
            f.0.add_comp(idx, Poly::random(n, deg, rng));
        }
        Ok(f)
    }
}

/// Increasing index tuples of length `k` from `0..n`.
pub fn index_sets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Sign of the permutation sorting `idx` (entries assumed distinct).
pub fn permutation_sign(idx: &[usize]) -> i32 {
    let mut inv = 0;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] > idx[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Section of `TM + T*M + (M x k)` over a chart: vector field, 1-form and `k`-valued function.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MixedSection {
    pub x: VectorField,
    pub alpha: OneForm,
    pub w: Vec<Poly>,
}

impl MixedSection {
    pub fn zero(n: usize, k: usize) -> Self {
        MixedSection { x: vf_zero(n), alpha: vf_zero(n), w: vec![Poly::zero(n); k] }
    }

    pub fn add(&self, o: &Self) -> Self {
        MixedSection { x: vec_add(&self.x, &o.x), alpha: vec_add(&self.alpha, &o.alpha), w: vec_add(&self.w, &o.w) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        MixedSection { x: vec_sub(&self.x, &o.x), alpha: vec_sub(&self.alpha, &o.alpha), w: vec_sub(&self.w, &o.w) }
    }

    pub fn mul_fn(&self, f: &Poly) -> Self {
        MixedSection { x: vec_mul(f, &self.x), alpha: vec_mul(f, &self.alpha), w: vec_mul(f, &self.w) }
    }

    pub fn is_zero(&self) -> bool {
        vec_is_zero(&self.x) && vec_is_zero(&self.alpha) && vec_is_zero(&self.w)
    }

    /// Flatten to a single coefficient list `(X, alpha, w)`.
    pub fn flatten(&self) -> Vec<Poly> {
        self.x.iter().chain(&self.alpha).chain(&self.w).cloned().collect()
    }

    pub fn unflatten(n: usize, v: &[Poly]) -> Self {
        MixedSection { x: v[..n].to_vec(), alpha: v[n..2 * n].to_vec(), w: v[2 * n..].to_vec() }
    }
}

/// Sign-safe absolute value of a rational, used by residual reporting.
pub fn q_abs(x: &Q) -> Q {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::qf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(n: usize, i: usize) -> Poly {
        Poly::var(n, i)
    }

    #[test]
    fn poly_arithmetic() {
        let p = x(2, 0).add(&x(2, 1)).pow(2);
        assert_eq!(p.degree(), Some(2));
        assert_eq!(p.eval(&[q(1), q(2)]), q(9));
        assert_eq!(p.deriv(0).eval(&[q(1), q(2)]), q(6));
        let c = p.compose(&[x(1, 0), x(1, 0).scale(&q(-1))]);
        assert!(c.is_zero());
        assert_eq!(Poly::zero(2).degree(), None);
    }

    #[test]
    fn d_squared_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..3 {
            let w = PolyForm::random(4, k, 3, &mut rng).unwrap();
            assert!(w.d().unwrap().d().unwrap().is_zero());
        }
    }

    #[test]
    fn d_of_function_is_gradient() {
        let f = x(2, 0).mul(&x(2, 1));
        let df = PolyForm::function(f).d().unwrap();
        assert_eq!(df.one_form_comps(), vec![x(2, 1), x(2, 0)]);
    }

    #[test]
    fn cartan_formula_on_two_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = PolyForm::random(3, 2, 2, &mut rng).unwrap();
        let xv: Vec<Poly> = (0..3).map(|_| Poly::random(3, 1, &mut rng)).collect();
        let yv: Vec<Poly> = (0..3).map(|_| Poly::random(3, 1, &mut rng)).collect();
        // i_[X,Y] = [L_X, i_Y]
        let lhs = w.interior(&vf_bracket(&xv, &yv));
        let rhs = w.interior(&yv).lie(&xv).unwrap().sub(&w.lie(&xv).unwrap().interior(&yv));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn schouten_vector_function_and_vectors() {
        let xv = vec![x(2, 1), x(2, 0).mul(&x(2, 0))];
        let f = x(2, 0).mul(&x(2, 1));
        let b = PolyMultivector::vector_field(&xv).schouten(&PolyMultivector::function(f.clone())).unwrap();
        assert_eq!(b.as_function(), vf_apply(&xv, &f));
        let yv = vec![x(2, 0), Poly::one(2)];
        let b = PolyMultivector::vector_field(&xv).schouten(&PolyMultivector::vector_field(&yv)).unwrap();
        assert_eq!(b.vector_comps(), vf_bracket(&xv, &yv));
    }

    fn cyclic_pi_pi(pi: &PolyMultivector, f: &Poly, g: &Poly, h: &Poly) -> Poly {
        let d = |p: &Poly| PolyForm::function(p.clone()).d().unwrap().one_form_comps();
        let term = |a: &Poly, b: &Poly, c: &Poly| {
            let inner = pi.eval_forms(&[d(b), d(c)]);
            pi.eval_forms(&[d(a), d(&inner)])
        };
        term(f, g, h).add(&term(g, h, f)).add(&term(h, f, g)).scale(&q(2))
    }

    #[test]
    fn schouten_bivector_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let pi = PolyMultivector::random(3, 2, 2, &mut rng).unwrap();
            let pp = pi.schouten(&pi).unwrap();
            let (f, g, h) = (x(3, 0), x(3, 1), x(3, 2));
            let d = |p: &Poly| PolyForm::function(p.clone()).d().unwrap().one_form_comps();
            assert_eq!(pp.eval_forms(&[d(&f), d(&g), d(&h)]), cyclic_pi_pi(&pi, &f, &g, &h));
        }
    }

    #[test]
    fn linear_poisson_is_poisson() {
        // so(3)* bracket {x_i, x_j} = eps_ijk x_k
        let n = 3;
        let pi = PolyMultivector::from_components(n, 2, &[(vec![0, 1], x(n, 2)), (vec![1, 2], x(n, 0)), (vec![2, 0], x(n, 1))]).unwrap();
        assert!(pi.schouten(&pi).unwrap().is_zero());
        let bad = pi.add(&PolyMultivector::from_components(n, 2, &[(vec![0, 1], x(n, 0))]).unwrap());
        assert!(!bad.schouten(&bad).unwrap().is_zero());
    }

    #[test]
    fn graded_symmetry_and_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let degs = [(1usize, 2usize, 1usize), (2, 1, 1), (1, 1, 2), (2, 2, 0), (0, 2, 1)];
        for &(a, b, c) in &degs {
            let p = PolyMultivector::random(3, a, 2, &mut rng).unwrap();
            let qv = PolyMultivector::random(3, b, 2, &mut rng).unwrap();
            let r = PolyMultivector::random(3, c, 1, &mut rng).unwrap();
            let sgn = |k: usize| if k % 2 == 0 { q(1) } else { q(-1) };
            let pq = p.schouten(&qv).unwrap();
            let qp = qv.schouten(&p).unwrap();
            assert_eq!(pq, qp.scale(&(-sgn((a + 1) * (b + 1)))));
            // [P,[Q,R]] = [[P,Q],R] + (-1)^{(p-1)(q-1)} [Q,[P,R]]
            if a + b + c >= 2 {
                let lhs = p.schouten(&qv.schouten(&r).unwrap()).unwrap();
                let rhs = pq.schouten(&r).unwrap().add(&qv.schouten(&p.schouten(&r).unwrap()).unwrap().scale(&sgn((a + 1) * (b + 1))));
                assert_eq!(lhs, rhs, "degrees {a} {b} {c}");
            }
        }
    }

    #[test]
    fn pullback_commutes_with_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = PolyForm::random(3, 1, 2, &mut rng).unwrap();
        let phi: Vec<Poly> = (0..3).map(|_| Poly::random(2, 2, &mut rng)).collect();
        assert_eq!(w.pullback(&phi).unwrap().d().unwrap(), w.d().unwrap().pullback(&phi).unwrap());
    }

    #[test]
    fn pullback_of_area_form_is_jacobian() {
        let n = 2;
        let area = PolyForm::from_components(n, 2, &[(vec![0, 1], Poly::one(n))]).unwrap();
        let phi = vec![x(2, 0).scale(&q(2)), x(2, 1).scale(&qf(1, 3))];
        assert_eq!(area.pullback(&phi).unwrap().component(&[0, 1]), Poly::constant(2, qf(2, 3)));
    }

    #[test]
    fn degree_caps() {
        assert!(matches!(PolyForm::zero(6, 5), Err(PolyError::DegreeCap { .. })));
        assert!(PolyForm::zero(3, 5).is_ok());
        assert!(matches!(PolyMultivector::zero(5, 4), Err(PolyError::DegreeCap { .. })));
        let w = PolyForm::random(5, 4, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(matches!(w.d(), Err(PolyError::DegreeCap { .. })));
    }

    #[test]
    fn form_evaluation_is_alternating() {
        let n = 3;
        let w = PolyForm::from_components(n, 2, &[(vec![1, 0], Poly::one(n))]).unwrap();
        let e = |i| crate::exactla::unit(3, i);
        let p = vec![q(0); 3];
        assert_eq!(w.eval(&p, &[e(0), e(1)]), q(-1));
        assert_eq!(w.eval(&p, &[e(1), e(0)]), q(1));
    }
}
