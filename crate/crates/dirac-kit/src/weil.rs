//! Weil algebras.
//!
//! For a Lie algebra `g` with dual basis `e^k`, `W(g)` is generated by odd
//! `theta^k` of bidegree (1,0) and even `s^k` of bidegree (1,1), so that
//! `W^{p,q}(g) = wedge^{p-q} g* (x) S^q g*`. Both differentials are odd
//! derivations (sign `(-1)^{number of theta to the left}`) fixed by
//!
//! * `d^v theta^k = s^k`, `d^v s^k = 0`;
//! * `d^h theta^k = -1/2 c_ij^k theta^i theta^j`, `d^h s^k = -c_ij^k theta^i s^j`.
//!
//! For a chart algebroid `A` the module works with `W^{1,2}(A)`, `W^{0,3}(A)`
//! and their images, stored on frame elements.

use crate::exactla::{qf, Q};
use crate::polycal::{merge_sign, vec_add, vf_apply, OneForm, Poly, PolyError, PolyForm};
use crate::qlie::LieAlgebra;
use crate::shifted::PolyAlgebroid;
use num::{One, Zero};
use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest first degree `p` produced by differentials.
pub const WEIL_DEGREE_CAP: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeilError {
    #[error("bidegree ({p}, {q}) exceeds the cap p <= {cap}")]
    BidegreeCap { p: usize, q: usize, cap: usize },
    #[error("algebra dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Monomial `theta^I s^J`: `I` strictly increasing, `J` non-decreasing.
pub type WeilMonomial = (Vec<usize>, Vec<usize>);

/// Element of `W(g)` as a sparse sum of monomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeilElement {
    dim: usize,
    terms: BTreeMap<WeilMonomial, Q>,
}

impl WeilElement {
    pub fn zero(dim: usize) -> Self {
        WeilElement { dim, terms: BTreeMap::new() }
    }

    pub fn one(dim: usize) -> Self {
        Self::monomial(dim, vec![], vec![], Q::one())
    }

    /// `c theta^I s^J`, normalising the order of `I` with its sign.
    pub fn monomial(dim: usize, theta: Vec<usize>, s: Vec<usize>, c: Q) -> Self {
        let mut e = Self::zero(dim);
        let Some((sign, th)) = sort_with_sign(&theta) else { return e };
        let mut s = s;
        s.sort_unstable();
        let c = if sign < 0 { -c } else { c };
        if !c.is_zero() {
            e.terms.insert((th, s), c);
        }
        e
    }

    pub fn theta(dim: usize, k: usize) -> Self {
        Self::monomial(dim, vec![k], vec![], Q::one())
    }

    pub fn s(dim: usize, k: usize) -> Self {
        Self::monomial(dim, vec![], vec![k], Q::one())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeMap<WeilMonomial, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(p, q)` when homogeneous and nonzero.
    pub fn bidegree(&self) -> Option<(usize, usize)> {
        let mut it = self.terms.keys().map(|(t, s)| (t.len() + s.len(), s.len()));
        let first = it.next()?;
        it.all(|b| b == first).then_some(first)
    }

    fn add_term(&mut self, m: WeilMonomial, c: Q) {
        let e = self.terms.entry(m.clone()).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        WeilElement { dim: self.dim, terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.dim);
        for ((t1, s1), c1) in &self.terms {
            for ((t2, s2), c2) in &o.terms {
                if let Some((sign, t)) = merge_sign(t1, t2) {
                    let mut s: Vec<usize> = s1.iter().chain(s2).copied().collect();
                    s.sort_unstable();
                    let c = c1 * c2;
                    r.add_term((t, s), if sign < 0 { -c } else { c });
                }
            }
        }
        r
    }

    /// Odd derivation determined by the images of the generators.
    fn derivation(&self, on_theta: &dyn Fn(usize) -> WeilElement, on_s: &dyn Fn(usize) -> WeilElement) -> Result<Self, WeilError> {
        let d = self.dim;
        let mut r = Self::zero(d);
        for ((th, s), c) in &self.terms {
            let s_part = s.iter().fold(Self::one(d), |acc, &k| acc.mul(&Self::s(d, k)));
            for (pos, &k) in th.iter().enumerate() {
                let before = th[..pos].iter().fold(Self::one(d), |acc, &i| acc.mul(&Self::theta(d, i)));
                let after = th[pos + 1..].iter().fold(Self::one(d), |acc, &i| acc.mul(&Self::theta(d, i)));
                let sign = if pos % 2 == 0 { c.clone() } else { -c.clone() };
                r = r.add(&before.mul(&on_theta(k)).mul(&after).mul(&s_part).scale(&sign));
            }
            let th_part = th.iter().fold(Self::one(d), |acc, &i| acc.mul(&Self::theta(d, i)));
            let sign = if th.len() % 2 == 0 { c.clone() } else { -c.clone() };
            for (pos, &k) in s.iter().enumerate() {
                let rest = s.iter().enumerate().filter(|&(i, _)| i != pos).fold(Self::one(d), |acc, (_, &j)| acc.mul(&Self::s(d, j)));
                r = r.add(&th_part.mul(&on_s(k)).mul(&rest).scale(&sign));
            }
        }
        if let Some((p, q)) = r.terms.keys().map(|(t, s)| (t.len() + s.len(), s.len())).max() {
            if p > WEIL_DEGREE_CAP {
                return Err(WeilError::BidegreeCap { p, q, cap: WEIL_DEGREE_CAP });
            }
        }
        Ok(r)
    }

    /// Random element of bidegree `(p, q)` with about `terms` monomials.
    pub fn random<R: Rng>(dim: usize, p: usize, q: usize, terms: usize, rng: &mut R) -> Self {
        let mut e = Self::zero(dim);
        if q > p || p - q > dim {
            return e;
        }
        for _ in 0..terms {
            let mut pool: Vec<usize> = (0..dim).collect();
            let mut th = Vec::new();
            for _ in 0..p - q {
                th.push(pool.swap_remove(rng.gen_range(0..pool.len())));
            }
            let s: Vec<usize> = (0..q).map(|_| rng.gen_range(0..dim)).collect();
            e = e.add(&Self::monomial(dim, th, s, crate::polycal::random_q(rng)));
        }
        e
    }
}

fn sort_with_sign(v: &[usize]) -> Option<(i32, Vec<usize>)> {
    let mut w = v.to_vec();
    let mut sign = 1;
    for i in 0..w.len() {
        for j in 0..w.len() - 1 - i {
            if w[j] == w[j + 1] {
                return None;
            }
            if w[j] > w[j + 1] {
                w.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    Some((sign, w))
}

/// `W(g)` with its two differentials.
#[derive(Clone, Debug)]
pub struct WeilAlgebra {
    pub lie: LieAlgebra,
}

impl WeilAlgebra {
    pub fn new(lie: LieAlgebra) -> Self {
        WeilAlgebra { lie }
    }

    pub fn dim(&self) -> usize {
        self.lie.dim()
    }

    fn check(&self, e: &WeilElement) -> Result<(), WeilError> {
        if e.dim != self.dim() {
            return Err(WeilError::DimensionMismatch(e.dim, self.dim()));
        }
        Ok(())
    }

    pub fn dv(&self, e: &WeilElement) -> Result<WeilElement, WeilError> {
        self.check(e)?;
        let d = self.dim();
        e.derivation(&|k| WeilElement::s(d, k), &|_| WeilElement::zero(d))
    }

    pub fn dh(&self, e: &WeilElement) -> Result<WeilElement, WeilError> {
        self.check(e)?;
        let d = self.dim();
        let lie = &self.lie;
        let on_theta = |k: usize| {
            let mut r = WeilElement::zero(d);
            for i in 0..d {
                for j in 0..d {
                    let c = lie.c(i, j, k);
                    if !c.is_zero() {
                        r = r.add(&WeilElement::monomial(d, vec![i, j], vec![], -c.clone() * qf(1, 2)));
                    }
                }
            }
            r
        };
        let on_s = |k: usize| {
            let mut r = WeilElement::zero(d);
            for i in 0..d {
                for j in 0..d {
                    let c = lie.c(i, j, k);
                    if !c.is_zero() {
                        r = r.add(&WeilElement::monomial(d, vec![i], vec![j], -c.clone()));
                    }
                }
            }
            r
        };
        e.derivation(&on_theta, &on_s)
    }

    /// Symmetric tensor `kappa in S^2 g*` from a symmetric matrix, `kappa = sum_{a<=b} k_ab s^a s^b` with doubled off-diagonal weight.
    pub fn quadratic(&self, k: &crate::exactla::QMat) -> WeilElement {
        let d = self.dim();
        let mut e = WeilElement::zero(d);
        for a in 0..d {
            for b in a..d {
                let c = if a == b { k[(a, b)].clone() } else { k[(a, b)].clone() * Q::from_integer(2.into()) };
                e = e.add(&WeilElement::monomial(d, vec![], vec![a, b], c));
            }
        }
        e
    }
}

/// Polynomial on `g` with variables `s^k` for an element of `S^q g*`.
fn symmetric_to_poly(e: &WeilElement) -> Poly {
    let d = e.dim();
    let mut p = Poly::zero(d);
    for ((th, s), c) in e.terms() {
        assert!(th.is_empty(), "not a symmetric tensor");
        let m = s.iter().fold(Poly::one(d), |acc, &k| acc.mul(&Poly::var(d, k)));
        p = p.add(&m.scale(c));
    }
    p
}

/// Closedness under `d^h` and coadjoint invariance, computed independently.
///
/// Invariance is tested on the polynomial `kappa(y, ..., y)`: for each basis
/// element `x` the derivative along `y -> [x, y]` must vanish.
pub fn dh_closed_iff_invariant(w: &WeilAlgebra, kappa: &WeilElement) -> Result<(bool, bool), WeilError> {
    let closed = w.dh(kappa)?.is_zero();
    let d = w.dim();
    let p = symmetric_to_poly(kappa);
    let invariant = (0..d).all(|x| {
        let field: Vec<Poly> = (0..d)
            .map(|k| (0..d).fold(Poly::zero(d), |acc, j| acc.add(&Poly::var(d, j).scale(w.lie.c(x, j, k)))))
            .collect();
        vf_apply(&field, &p).is_zero()
    });
    Ok((closed, invariant))
}

/// Random symmetric `kappa in S^2 g*`, invariant with probability about one half when `invariant` supplies a basis.
pub fn random_kappa<R: Rng>(w: &WeilAlgebra, invariant: &[crate::exactla::QMat], rng: &mut R) -> WeilElement {
    let d = w.dim();
    if !invariant.is_empty() && rng.gen_bool(0.5) {
        let mut k = crate::exactla::QMat::zeros(d, d);
        for b in invariant {
            k = k.add(&b.scale(&crate::polycal::random_q(rng)));
        }
        return w.quadratic(&k);
    }
    WeilElement::random(d, 2, 2, 3, rng)
}

/// `(d^v)^2 = 0`, `(d^h)^2 = 0` and `d^v d^h + d^h d^v = 0` on `count` random elements of
/// bidegrees `(p, q)` with `q <= p <= max_p`, cycling through the bidegrees.
///
/// Returns the first failing identity and bidegree.
pub fn double_complex_identities<R: Rng>(w: &WeilAlgebra, count: usize, max_p: usize, rng: &mut R) -> Result<Option<String>, WeilError> {
    let degrees: Vec<(usize, usize)> = (0..=max_p).flat_map(|p| (0..=p).map(move |q| (p, q))).collect();
    for i in 0..count {
        let (p, q) = degrees[i % degrees.len()];
        let e = WeilElement::random(w.dim(), p, q, 3, rng);
        let (dv, dh) = (w.dv(&e)?, w.dh(&e)?);
        if !w.dv(&dv)?.is_zero() {
            return Ok(Some(format!("(d^v)^2 on element {i} of bidegree ({p}, {q})")));
        }
        if !w.dh(&dh)?.is_zero() {
            return Ok(Some(format!("(d^h)^2 on element {i} of bidegree ({p}, {q})")));
        }
        if !w.dv(&dh)?.add(&w.dh(&dv)?).is_zero() {
            return Ok(Some(format!("d^v d^h + d^h d^v on element {i} of bidegree ({p}, {q})")));
        }
    }
    Ok(None)
}

/// On `count` random `kappa in S^2 g*`, closedness under `d^h` agrees with ad-invariance.
///
/// Returns the number of invariant samples and the first disagreement.
pub fn closedness_matches_invariance<R: Rng>(
    w: &WeilAlgebra,
    invariant: &[crate::exactla::QMat],
    count: usize,
    rng: &mut R,
) -> Result<(usize, Option<String>), WeilError> {
    let mut invariant_count = 0;
    for i in 0..count {
        let k = random_kappa(w, invariant, rng);
        let (closed, inv) = dh_closed_iff_invariant(w, &k)?;
        if closed != inv {
            return Ok((invariant_count, Some(format!("sample {i}: closed {closed}, invariant {inv}"))));
        }
        invariant_count += usize::from(inv);
    }
    Ok((invariant_count, None))
}

/// Element of `W^{1,2}(A)` on a frame: `c0[b] = c_0(e_b)` (2-form), `c1[b] = c_1(|e_b)` (1-form).
#[derive(Clone, Debug, PartialEq)]
pub struct W12 {
    pub c0: Vec<PolyForm>,
    pub c1: Vec<PolyForm>,
}

/// `lift_kappa` output on frame elements: `tau0[b][c]`, `tau1[b][c] = tau_1(e_b | e_c)`, `tau2[b][c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lift {
    pub tau0: Vec<Vec<PolyForm>>,
    pub tau1: Vec<Vec<PolyForm>>,
    pub tau2: Vec<Vec<Poly>>,
}

/// Algebroid morphism data `phi(e_b)` valued in `g` with a symmetric `kappa` on `g`.
pub struct PhiKappa<'a> {
    pub phi: &'a [Vec<Poly>],
    pub kappa: &'a crate::exactla::QMat,
}

impl PhiKappa<'_> {
    fn kap(&self, u: &[Poly], v: &[Poly]) -> Poly {
        let n = u.first().map(|p| p.nvars()).unwrap_or(0);
        let m = self.kappa.rows;
        let mut s = Poly::zero(n);
        for i in 0..m {
            for j in 0..m {
                if !self.kappa[(i, j)].is_zero() {
                    s = s.add(&u[i].mul(&v[j]).scale(&self.kappa[(i, j)]));
                }
            }
        }
        s
    }

    /// `phi(u)` for `u = sum u^b e_b`.
    fn apply(&self, u: &[Poly]) -> Vec<Poly> {
        let m = self.kappa.rows;
        let n = u.first().map(|p| p.nvars()).unwrap_or(0);
        u.iter().zip(self.phi).fold(vec![Poly::zero(n); m], |acc, (c, p)| vec_add(&acc, &crate::polycal::vec_mul(c, p)))
    }

    /// `kappa(d phi(u), phi(v))` as a 1-form.
    fn kdp(&self, u: &[Poly], v: &[Poly], n: usize) -> PolyForm {
        let (pu, pv) = (self.apply(u), self.apply(v));
        let comps: Vec<Poly> = (0..n).map(|i| self.kap(&pu.iter().map(|p| p.deriv(i)).collect::<Vec<_>>(), &pv)).collect();
        PolyForm::one_form(&comps)
    }

    /// `(tau0, tau1, tau2)` evaluated on arbitrary sections.
    pub fn tau(&self, u: &[Poly], v: &[Poly], n: usize) -> Result<(PolyForm, PolyForm, Poly), WeilError> {
        let k = self.kdp(u, v, n);
        Ok((k.d()?, k.neg(), self.kap(&self.apply(u), &self.apply(v))))
    }
}

/// The lift of `kappa` along `phi: A -> g` on frame elements.
pub fn lift_kappa(alg: &PolyAlgebroid, pk: &PhiKappa) -> Result<Lift, WeilError> {
    let r = alg.rank();
    let n = alg.n;
    let e = |b: usize| crate::polycal::const_vec(n, &crate::exactla::unit(r, b));
    let mut lift = Lift { tau0: vec![], tau1: vec![], tau2: vec![] };
    for b in 0..r {
        let (mut t0, mut t1, mut t2) = (vec![], vec![], vec![]);
        for c in 0..r {
            let (a, b1, c2) = pk.tau(&e(b), &e(c), n)?;
            t0.push(a);
            t1.push(b1);
            t2.push(c2);
        }
        lift.tau0.push(t0);
        lift.tau1.push(t1);
        lift.tau2.push(t2);
    }
    Ok(lift)
}

/// The compatibility rules `tau0(u, f v) = f tau0(u, v) - df ^ tau1(u|v)` and
/// `tau1(f u|v) = f tau1(u|v) - df tau2(u, v)` on given sections.
pub fn lift_compatible(pk: &PhiKappa, u: &[Poly], v: &[Poly], f: &Poly, n: usize) -> Result<bool, WeilError> {
    let (t0, t1, t2) = pk.tau(u, v, n)?;
    let fv: Vec<Poly> = v.iter().map(|p| p.mul(f)).collect();
    let fu: Vec<Poly> = u.iter().map(|p| p.mul(f)).collect();
    let df = PolyForm::function(f.clone()).d()?;
    let (l0, _, _) = pk.tau(u, &fv, n)?;
    let ok0 = l0 == t0.mul_fn(f).sub(&df.wedge(&t1)?);
    let (_, l1, _) = pk.tau(&fu, v, n)?;
    let ok1 = l1 == t1.mul_fn(f).sub(&df.mul_fn(&t2));
    Ok(ok0 && ok1)
}

/// `c_0(sum f^d e_d) = sum f^d c_0(e_d) - df^d ^ c_1(|e_d)`.
fn c0_on(c: &W12, coeffs: &[Poly]) -> Result<PolyForm, WeilError> {
    let n = coeffs[0].nvars();
    let mut r = PolyForm::zero(n, 2)?;
    for (d, f) in coeffs.iter().enumerate() {
        if f.is_zero() {
            continue;
        }
        let df = PolyForm::function(f.clone()).d()?;
        r = r.add(&c.c0[d].mul_fn(f)).sub(&df.wedge(&c.c1[d])?);
    }
    Ok(r)
}

fn c1_on(c: &W12, coeffs: &[Poly]) -> Result<PolyForm, WeilError> {
    let n = coeffs[0].nvars();
    let mut r = PolyForm::zero(n, 1)?;
    for (d, f) in coeffs.iter().enumerate() {
        r = r.add(&c.c1[d].mul_fn(f));
    }
    Ok(r)
}

/// `(c, eta)` from an isotropic structure `(lambda, eta)`: `c_1(|u) = lambda(u)`, `c_0(u) = i_{a u} eta - d lambda(u)`.
pub fn infisot_to_w12(alg: &PolyAlgebroid, lambda: &[OneForm], eta: &PolyForm) -> Result<W12, WeilError> {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    for (b, l) in lambda.iter().enumerate() {
        let lf = PolyForm::one_form(l);
        c0.push(eta.interior(&alg.anchors[b]).sub(&lf.d()?));
        c1.push(lf);
    }
    Ok(W12 { c0, c1 })
}

/// Inverse of [`infisot_to_w12`] on the `lambda` part.
pub fn w12_to_lambda(c: &W12) -> Vec<OneForm> {
    c.c1.iter().map(PolyForm::one_form_comps).collect()
}

/// Both evaluation routes of `(d^v + d^h)(c + eta) = phi^(kappa)`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct W12Report {
    pub closed: bool,
    pub c0_condition: bool,
    pub bracket_identity: bool,
    pub symmetric_identity: bool,
    /// Every component of `(d^v + d^h)(c + eta) - phi^(kappa)` vanishes.
    pub direct: bool,
    pub failing_components: Vec<String>,
}

impl W12Report {
    pub fn conditions(&self) -> bool {
        self.closed && self.c0_condition && self.bracket_identity && self.symmetric_identity
    }

    pub fn routes_agree(&self) -> bool {
        self.conditions() == self.direct
    }
}

/// Evaluate conditions (i)-(iii) and the componentwise differential of `c + eta` against the lift of `kappa`.
pub fn w12_check(alg: &PolyAlgebroid, c: &W12, eta: &PolyForm, pk: &PhiKappa) -> Result<W12Report, WeilError> {
    let r = alg.rank();
    let lift = lift_kappa(alg, pk)?;
    let mut failing = Vec::new();

    // Condition route.
    let closed = eta.d()?.is_zero();
    let c0_condition = (0..r).all(|b| c.c0[b] == eta.interior(&alg.anchors[b]).sub(&c.c1[b].d().expect("1-form")));
    let mut bracket_identity = true;
    let mut symmetric_identity = true;
    for b in 0..r {
        for d in 0..r {
            let (ab, ad) = (&alg.anchors[b], &alg.anchors[d]);
            let lhs = c1_on(c, alg.frame_bracket(b, d))?;
            let rhs = c.c1[d]
                .lie(ab)?
                .sub(&c.c1[b].d()?.interior(ad))
                .add(&eta.interior(ab).interior(ad))
                .sub(&lift.tau1[b][d]);
            if lhs != rhs {
                bracket_identity = false;
            }
            let s = c.c1[d].interior(ab).add(&c.c1[b].interior(ad)).as_function().add(&lift.tau2[b][d]);
            if !s.is_zero() {
                symmetric_identity = false;
            }
        }
    }

    // Direct route: components in W^{0,4}, W^{1,3} and W^{2,2}.
    if !eta.d()?.is_zero() {
        failing.push("W04".to_string());
    }
    for b in 0..r {
        let ab = &alg.anchors[b];
        let w13_0 = eta.lie(ab)?.sub(&c.c0[b].d()?);
        if !w13_0.is_zero() {
            failing.push(format!("W13_0(e{b})"));
        }
        let w13_1 = eta.interior(ab).neg().add(&c.c1[b].d()?).add(&c.c0[b]);
        if !w13_1.is_zero() {
            failing.push(format!("W13_1(|e{b})"));
        }
        for d in 0..r {
            let ad = &alg.anchors[d];
            let h0 = c.c0[d].lie(ab)?.sub(&c.c0[b].lie(ad)?).sub(&c0_on(c, alg.frame_bracket(b, d))?);
            if h0 != lift.tau0[b][d] {
                failing.push(format!("W22_0(e{b}, e{d})"));
            }
            let h1 = c.c1[d].lie(ab)?.add(&c.c0[b].interior(ad)).sub(&c1_on(c, alg.frame_bracket(b, d))?);
            if h1 != lift.tau1[b][d] {
                failing.push(format!("W22_1(e{b}|e{d})"));
            }
            let h2 = c.c1[d].interior(ab).add(&c.c1[b].interior(ad)).as_function().neg();
            if h2 != lift.tau2[b][d] {
                failing.push(format!("W22_2(|e{b}, e{d})"));
            }
        }
    }
    Ok(W12Report { closed, c0_condition, bracket_identity, symmetric_identity, direct: failing.is_empty(), failing_components: failing })
}

/// Zero `W^{1,2}` data.
pub fn w12_zero(alg: &PolyAlgebroid) -> Result<W12, WeilError> {
    let r = alg.rank();
    Ok(W12 { c0: vec![PolyForm::zero(alg.n, 2)?; r], c1: vec![PolyForm::zero(alg.n, 1)?; r] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{unit, QMat};
    use crate::qlie::{gl2_trace, sl2_trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_complex_on_sl2_and_gl2() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for g in [sl2_trace(), gl2_trace()] {
            let w = WeilAlgebra::new(g.lie.clone());
            let d = w.dim();
            for p in 0..=3 {
                for qd in 0..=p {
                    let e = WeilElement::random(d, p, qd, 3, &mut rng);
                    assert!(w.dv(&w.dv(&e).unwrap()).unwrap().is_zero());
                    assert!(w.dh(&w.dh(&e).unwrap()).unwrap().is_zero(), "({p},{qd})");
                    let anti = w.dv(&w.dh(&e).unwrap()).unwrap().add(&w.dh(&w.dv(&e).unwrap()).unwrap());
                    assert!(anti.is_zero());
                }
            }
        }
    }

    #[test]
    fn suite_drivers() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let g = gl2_trace();
        let w = WeilAlgebra::new(g.lie.clone());
        assert_eq!(double_complex_identities(&w, 20, 3, &mut rng).unwrap(), None);
        let (inv, bad) = closedness_matches_invariance(&w, &[g.form.gram().clone()], 12, &mut rng).unwrap();
        assert!(bad.is_none() && inv > 0 && inv < 12);
        assert!(double_complex_identities(&w, 1, 6, &mut rng).is_ok());
    }

    #[test]
    fn dv_takes_generators_to_generators() {
        let w = WeilAlgebra::new(sl2_trace().lie);
        assert_eq!(w.dv(&WeilElement::theta(3, 1)).unwrap(), WeilElement::s(3, 1));
        let e = WeilElement::theta(3, 0).mul(&WeilElement::theta(3, 2));
        assert_eq!(e.bidegree(), Some((2, 0)));
        assert_eq!(w.dv(&e).unwrap().bidegree(), Some((2, 1)));
    }

    #[test]
    fn trace_form_is_closed_and_invariance_agrees() {
        let g = sl2_trace();
        let w = WeilAlgebra::new(g.lie.clone());
        let kappa = w.quadratic(g.form.gram());
        assert_eq!(dh_closed_iff_invariant(&w, &kappa).unwrap(), (true, true));
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..10 {
            let k = random_kappa(&w, &[g.form.gram().clone()], &mut rng);
            let (c, i) = dh_closed_iff_invariant(&w, &k).unwrap();
            assert_eq!(c, i);
        }
        let ab = WeilAlgebra::new(LieAlgebra::abelian(2));
        let k = WeilElement::random(2, 2, 2, 3, &mut rng);
        assert_eq!(dh_closed_iff_invariant(&ab, &k).unwrap(), (true, true));
        let bad = w.quadratic(&QMat::from_i64(3, 3, &[1, 0, 0, 0, 0, 0, 0, 0, 0]));
        assert_eq!(dh_closed_iff_invariant(&w, &bad).unwrap(), (false, false));
    }

    fn action_sl2_on_r3() -> (PolyAlgebroid, crate::qlie::QuadLieAlgebra) {
        let g = sl2_trace();
        (PolyAlgebroid::action(&g.lie, crate::courant::coadjoint_action(&g.lie)), g)
    }

    #[test]
    fn lift_of_projection_and_zero() {
        let (alg, g) = action_sl2_on_r3();
        let n = 3;
        let phi: Vec<Vec<Poly>> = (0..3).map(|b| crate::polycal::const_vec(n, &unit(3, b))).collect();
        let pk = PhiKappa { phi: &phi, kappa: g.form.gram() };
        let l = lift_kappa(&alg, &pk).unwrap();
        for b in 0..3 {
            for c in 0..3 {
                assert!(l.tau0[b][c].is_zero() && l.tau1[b][c].is_zero());
                assert_eq!(l.tau2[b][c], Poly::constant(n, g.form.gram()[(b, c)].clone()));
            }
        }
        let tm = PolyAlgebroid::tangent(2);
        let zero: Vec<Vec<Poly>> = vec![vec![Poly::zero(2); 3]; 2];
        let pk = PhiKappa { phi: &zero, kappa: g.form.gram() };
        let l = lift_kappa(&tm, &pk).unwrap();
        assert!(l.tau2.iter().flatten().all(Poly::is_zero));
    }

    #[test]
    fn lift_is_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let g = sl2_trace();
        let n = 2;
        let phi: Vec<Vec<Poly>> = (0..2).map(|_| (0..3).map(|_| Poly::random(n, 1, &mut rng)).collect()).collect();
        let pk = PhiKappa { phi: &phi, kappa: g.form.gram() };
        for _ in 0..3 {
            let u: Vec<Poly> = (0..2).map(|_| Poly::random(n, 1, &mut rng)).collect();
            let v: Vec<Poly> = (0..2).map(|_| Poly::random(n, 1, &mut rng)).collect();
            let f = Poly::random(n, 1, &mut rng);
            assert!(lift_compatible(&pk, &u, &v, &f, n).unwrap());
        }
    }

    #[test]
    fn w12_routes_agree() {
        let (alg, g) = action_sl2_on_r3();
        let n = 3;
        let zero_eta = PolyForm::zero(n, 3).unwrap();
        let zero_k = QMat::zeros(3, 3);
        let phi0: Vec<Vec<Poly>> = vec![vec![Poly::zero(n); 3]; 3];
        let pk0 = PhiKappa { phi: &phi0, kappa: &zero_k };
        let rep = w12_check(&alg, &w12_zero(&alg).unwrap(), &zero_eta, &pk0).unwrap();
        assert!(rep.conditions() && rep.direct);
        // A non-closed eta fails (i) and only the W^{0,4} component among those involving eta alone.
        let silent = PolyAlgebroid::action(&g.lie, vec![vec![Poly::zero(4); 4]; 3]);
        let eta = PolyForm::from_components(4, 3, &[(vec![0, 1, 2], Poly::var(4, 3))]).unwrap();
        let c = infisot_to_w12(&silent, &vec![vec![Poly::zero(4); 4]; 3], &eta).unwrap();
        let phi4: Vec<Vec<Poly>> = vec![vec![Poly::zero(4); 3]; 3];
        let rep = w12_check(&silent, &c, &eta, &PhiKappa { phi: &phi4, kappa: &zero_k }).unwrap();
        assert!(!rep.closed && rep.c0_condition && rep.bracket_identity && rep.symmetric_identity);
        assert_eq!(rep.failing_components, vec!["W04".to_string()]);
        let pi = crate::courant::lie_poisson(&g.lie);
        let cot = PolyAlgebroid::cotangent(&pi);
        let lambda: Vec<OneForm> = (0..3).map(|i| crate::polycal::const_vec(n, &unit(3, i))).collect();
        let c = infisot_to_w12(&cot, &lambda, &zero_eta).unwrap();
        assert_eq!(w12_to_lambda(&c), lambda);
        let rep = w12_check(&cot, &c, &zero_eta, &pk0).unwrap();
        assert!(rep.conditions() && rep.direct, "{rep:?}");
    }
}
