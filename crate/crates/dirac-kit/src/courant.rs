//! Courant algebroids over polynomial charts and Dirac structures inside them.
//!
//! Two families are implemented exactly:
//!
//! * `TM + T*M + (M x k)` with a closed 3-form `eta` (the product of the
//!   `eta`-twisted standard algebroid with a quadratic Lie algebra `k`);
//! * action Courant algebroids `M x d` for a polynomial action of a quadratic
//!   Lie algebra `d` with coisotropic stabilizers.
//!
//! Sections are lists of polynomials in the algebroid's frame. For
//! `TM + T*M + k` the layout is `(X, alpha, w)`.

use crate::exactla::{is_zero_vec, q, unit, QForm, QMat, Subspace, Q};
use crate::polycal::{
    const_vec, exponents_up_to, pair_form_vf, random_q, vec_add, vec_eval, vec_is_zero, vec_mul, vec_sub, vf_apply,
    vf_bracket, MixedSection, OneForm, Poly, PolyError, PolyForm, PolyMultivector, VectorField,
};
use crate::qlie::{drinfeld_double, LieQuasiBialgebra, QlieError, QuadLieAlgebra};
use num::{One, Zero};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CourantError {
    #[error("3-form is not closed")]
    NotClosed,
    #[error("anchor is not a Lie algebra homomorphism on basis pair ({0}, {1})")]
    AnchorNotHom(usize, usize),
    #[error("stabilizer is not coisotropic at {0:?}")]
    StabilizerNotCoisotropic(Vec<String>),
    #[error("frame rank drops at {0:?}")]
    RankDrop(Vec<String>),
    #[error("splitting is not an isotropic section of the anchor at {0:?}")]
    BadSplitting(Vec<String>),
    #[error("section has length {found}, expected {expected}")]
    SectionLength { expected: usize, found: usize },
    #[error("not a quasi-Poisson frame at {point:?}: {reason}")]
    NotQuasiPoisson { point: Vec<String>, reason: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Qlie(#[from] QlieError),
}

fn show(p: &[Q]) -> Vec<String> {
    p.iter().map(|x| x.to_string()).collect()
}

/// A Courant algebroid over a polynomial chart.
pub trait CourantAlgebroid {
    fn chart_dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn anchor(&self, e: &[Poly]) -> VectorField;
    fn pairing(&self, e1: &[Poly], e2: &[Poly]) -> Poly;
    fn bracket(&self, e1: &[Poly], e2: &[Poly]) -> Result<Vec<Poly>, CourantError>;
    /// `D f`, characterised by `<D f, e> = a(e) f`.
    fn d_op(&self, f: &Poly) -> Vec<Poly>;
    /// Gram matrix of the fibre pairing at a point.
    fn fibre_form(&self, x: &[Q]) -> QForm;
}

/// `TM + T*M + (M x k)` twisted by a closed 3-form.
#[derive(Clone, Debug)]
pub struct ProductCourant {
    n: usize,
    eta: Option<PolyForm>,
    k: Option<QuadLieAlgebra>,
}

impl ProductCourant {
    pub fn standard(n: usize) -> Self {
        ProductCourant { n, eta: None, k: None }
    }

    /// `T_eta M`; fails unless `d eta = 0`.
    pub fn twisted(eta: PolyForm) -> Result<Self, CourantError> {
        Self::new(eta.chart_dim(), Some(eta), None)
    }

    pub fn new(n: usize, eta: Option<PolyForm>, k: Option<QuadLieAlgebra>) -> Result<Self, CourantError> {
        if let Some(e) = &eta {
            assert_eq!(e.degree(), 3, "twisting form must have degree 3");
            if !e.d()?.is_zero() {
                return Err(CourantError::NotClosed);
            }
        }
        Ok(ProductCourant { n, eta, k })
    }

    pub fn eta(&self) -> Option<&PolyForm> {
        self.eta.as_ref()
    }

    pub fn k(&self) -> Option<&QuadLieAlgebra> {
        self.k.as_ref()
    }

    pub fn kdim(&self) -> usize {
        self.k.as_ref().map(|k| k.dim()).unwrap_or(0)
    }

    fn unpack(&self, e: &[Poly]) -> MixedSection {
        MixedSection::unflatten(self.n, e)
    }

    /// `<d w1, w2>` as a 1-form.
    fn dw_pair(&self, w1: &[Poly], w2: &[Poly]) -> OneForm {
        let n = self.n;
        let Some(k) = &self.k else { return vec![Poly::zero(n); n] };
        let g = k.form.gram();
        let gw2: Vec<Poly> = (0..k.dim())
            .map(|a| (0..k.dim()).fold(Poly::zero(n), |s, b| s.add(&w2[b].scale(&g[(a, b)]))))
            .collect();
        (0..n).map(|i| w1.iter().zip(&gw2).fold(Poly::zero(n), |s, (a, b)| s.add(&a.deriv(i).mul(b)))).collect()
    }

    /// Gauge transformation `X + alpha + w -> X + (alpha + i_X B) + w`.
    pub fn gauge_section(&self, b: &PolyForm, e: &[Poly]) -> Vec<Poly> {
        let s = self.unpack(e);
        let ixb = b.interior(&s.x).one_form_comps();
        MixedSection { x: s.x, alpha: vec_add(&s.alpha, &ixb), w: s.w }.flatten()
    }

    /// The algebroid twisted by `eta - dB`.
    pub fn gauged(&self, b: &PolyForm) -> Result<ProductCourant, CourantError> {
        let db = b.d()?;
        let eta = match &self.eta {
            Some(e) => e.sub(&db),
            None => db.neg(),
        };
        ProductCourant::new(self.n, Some(eta), self.k.clone())
    }

    /// Random section with polynomial coefficients of degree at most `deg`.
    pub fn random_section<R: Rng>(&self, deg: u32, rng: &mut R) -> Vec<Poly> {
        (0..self.rank()).map(|_| Poly::random(self.n, deg, rng)).collect()
    }
}

impl CourantAlgebroid for ProductCourant {
    fn chart_dim(&self) -> usize {
        self.n
    }

    fn rank(&self) -> usize {
        2 * self.n + self.kdim()
    }

    fn anchor(&self, e: &[Poly]) -> VectorField {
        e[..self.n].to_vec()
    }

    fn pairing(&self, e1: &[Poly], e2: &[Poly]) -> Poly {
        let (a, b) = (self.unpack(e1), self.unpack(e2));
        let mut s = pair_form_vf(&a.alpha, &b.x).add(&pair_form_vf(&b.alpha, &a.x));
        if let Some(k) = &self.k {
            let g = k.form.gram();
            for i in 0..k.dim() {
                for j in 0..k.dim() {
                    if !g[(i, j)].is_zero() {
                        s = s.add(&a.w[i].mul(&b.w[j]).scale(&g[(i, j)]));
                    }
                }
            }
        }
        s
    }

    fn bracket(&self, e1: &[Poly], e2: &[Poly]) -> Result<Vec<Poly>, CourantError> {
        for e in [e1, e2] {
            if e.len() != self.rank() {
                return Err(CourantError::SectionLength { expected: self.rank(), found: e.len() });
            }
        }
        let (a, b) = (self.unpack(e1), self.unpack(e2));
        let x = vf_bracket(&a.x, &b.x);
        let a1 = PolyForm::one_form(&a.alpha);
        let a2 = PolyForm::one_form(&b.alpha);
        let mut alpha = a2.lie(&a.x)?.sub(&a1.d()?.interior(&b.x));
        if let Some(eta) = &self.eta {
            alpha = alpha.add(&eta.interior(&a.x).interior(&b.x));
        }
        let alpha = vec_add(&alpha.one_form_comps(), &self.dw_pair(&a.w, &b.w));
        let w = match &self.k {
            None => Vec::new(),
            Some(k) => {
                let lie = vec_sub(
                    &b.w.iter().map(|p| vf_apply(&a.x, p)).collect::<Vec<_>>(),
                    &a.w.iter().map(|p| vf_apply(&b.x, p)).collect::<Vec<_>>(),
                );
                vec_add(&lie, &poly_bracket(k, &a.w, &b.w))
            }
        };
        Ok(MixedSection { x, alpha, w }.flatten())
    }

    fn d_op(&self, f: &Poly) -> Vec<Poly> {
        let df = PolyForm::function(f.clone()).d().expect("1-forms are below the cap").one_form_comps();
        MixedSection { x: vec![Poly::zero(self.n); self.n], alpha: df, w: vec![Poly::zero(self.n); self.kdim()] }.flatten()
    }

    fn fibre_form(&self, _x: &[Q]) -> QForm {
        let h = QForm::hyperbolic(self.n);
        match &self.k {
            Some(k) => h.direct_sum(&k.form),
            None => h,
        }
    }
}

/// Pointwise bracket of `k`-valued polynomial functions.
pub fn poly_bracket(k: &QuadLieAlgebra, u: &[Poly], v: &[Poly]) -> Vec<Poly> {
    let d = k.dim();
    let n = u.first().map(|p| p.nvars()).unwrap_or(0);
    let mut r = vec![Poly::zero(n); d];
    for i in 0..d {
        if u[i].is_zero() {
            continue;
        }
        for j in 0..d {
            if v[j].is_zero() {
                continue;
            }
            let uv = u[i].mul(&v[j]);
            for (kk, rk) in r.iter_mut().enumerate() {
                let c = k.lie.c(i, j, kk);
                if !c.is_zero() {
                    *rk = rk.add(&uv.scale(c));
                }
            }
        }
    }
    r
}

/// Action Courant algebroid `M x d` for polynomial vector fields `a(e_i)`.
#[derive(Clone, Debug)]
pub struct ActionCourant {
    n: usize,
    d: QuadLieAlgebra,
    anchors: Vec<VectorField>,
    ginv: QMat,
}

impl ActionCourant {
    /// Validates that the anchor is a homomorphism and that stabilizers are coisotropic at `points`.
    pub fn new(d: QuadLieAlgebra, anchors: Vec<VectorField>, points: &[Vec<Q>]) -> Result<Self, CourantError> {
        let n = anchors[0].len();
        assert_eq!(anchors.len(), d.dim(), "one anchor field per basis vector");
        let m = d.dim();
        for i in 0..m {
            for j in i + 1..m {
                let lhs = vf_bracket(&anchors[i], &anchors[j]);
                let br = d.lie.bracket(&unit(m, i), &unit(m, j));
                let rhs = (0..m).fold(vec![Poly::zero(n); n], |acc, k| {
                    if br[k].is_zero() {
                        acc
                    } else {
                        vec_add(&acc, &anchors[k].iter().map(|p| p.scale(&br[k])).collect::<Vec<_>>())
                    }
                });
                if lhs != rhs {
                    return Err(CourantError::AnchorNotHom(i, j));
                }
            }
        }
        let ginv = d.form.gram().inverse().expect("nondegenerate form");
        let ca = ActionCourant { n, d, anchors, ginv };
        for p in points {
            let stab = ca.stabilizer(p);
            if !stab.contains_subspace(&ca.d.form.orth_complement(&stab)) {
                return Err(CourantError::StabilizerNotCoisotropic(show(p)));
            }
        }
        Ok(ca)
    }

    pub fn algebra(&self) -> &QuadLieAlgebra {
        &self.d
    }

    pub fn anchors(&self) -> &[VectorField] {
        &self.anchors
    }

    /// Matrix of the anchor `d -> T_x M` at a point.
    pub fn anchor_matrix(&self, x: &[Q]) -> QMat {
        let cols: Vec<Vec<Q>> = self.anchors.iter().map(|a| vec_eval(a, x)).collect();
        QMat::from_cols(self.n, &cols)
    }

    pub fn stabilizer(&self, x: &[Q]) -> Subspace {
        Subspace::kernel_of(&self.anchor_matrix(x))
    }

    /// Exact at `x`: anchor surjective and stabilizer lagrangian.
    pub fn is_exact_at(&self, x: &[Q]) -> bool {
        let stab = self.stabilizer(x);
        self.anchor_matrix(x).rank() == self.n && self.d.form.orth_complement(&stab) == stab
    }

    /// `G^-1 a*(beta)` for a 1-form `beta`.
    fn a_star(&self, beta: &[Poly]) -> Vec<Poly> {
        let m = self.d.dim();
        let raw: Vec<Poly> = self.anchors.iter().map(|a| pair_form_vf(beta, a)).collect();
        (0..m)
            .map(|i| (0..m).fold(Poly::zero(self.n), |s, j| if self.ginv[(i, j)].is_zero() { s } else { s.add(&raw[j].scale(&self.ginv[(i, j)])) }))
            .collect()
    }

    pub fn random_section<R: Rng>(&self, deg: u32, rng: &mut R) -> Vec<Poly> {
        (0..self.rank()).map(|_| Poly::random(self.n, deg, rng)).collect()
    }
}

impl CourantAlgebroid for ActionCourant {
    fn chart_dim(&self) -> usize {
        self.n
    }

    fn rank(&self) -> usize {
        self.d.dim()
    }

    fn anchor(&self, e: &[Poly]) -> VectorField {
        e.iter().zip(&self.anchors).fold(vec![Poly::zero(self.n); self.n], |acc, (c, a)| vec_add(&acc, &vec_mul(c, a)))
    }

    fn pairing(&self, e1: &[Poly], e2: &[Poly]) -> Poly {
        let g = self.d.form.gram();
        let m = self.d.dim();
        let mut s = Poly::zero(self.n);
        for i in 0..m {
            for j in 0..m {
                if !g[(i, j)].is_zero() {
                    s = s.add(&e1[i].mul(&e2[j]).scale(&g[(i, j)]));
                }
            }
        }
        s
    }

    fn bracket(&self, e1: &[Poly], e2: &[Poly]) -> Result<Vec<Poly>, CourantError> {
        for e in [e1, e2] {
            if e.len() != self.rank() {
                return Err(CourantError::SectionLength { expected: self.rank(), found: e.len() });
            }
        }
        let (au, av) = (self.anchor(e1), self.anchor(e2));
        let pointwise = poly_bracket(&self.d, e1, e2);
        let lie = vec_sub(
            &e2.iter().map(|p| vf_apply(&au, p)).collect::<Vec<_>>(),
            &e1.iter().map(|p| vf_apply(&av, p)).collect::<Vec<_>>(),
        );
        // beta = <du, v>
        let g = self.d.form.gram();
        let m = self.d.dim();
        let gv: Vec<Poly> =
            (0..m).map(|a| (0..m).fold(Poly::zero(self.n), |s, b| s.add(&e2[b].scale(&g[(a, b)])))).collect();
        let beta: Vec<Poly> =
            (0..self.n).map(|i| e1.iter().zip(&gv).fold(Poly::zero(self.n), |s, (u, w)| s.add(&u.deriv(i).mul(w)))).collect();
        Ok(vec_add(&vec_add(&pointwise, &lie), &self.a_star(&beta)))
    }

    fn d_op(&self, f: &Poly) -> Vec<Poly> {
        let df = PolyForm::function(f.clone()).d().expect("1-forms are below the cap").one_form_comps();
        self.a_star(&df)
    }

    fn fibre_form(&self, _x: &[Q]) -> QForm {
        self.d.form.clone()
    }
}

/// `gl2 + gl2bar` acting on the chart of 2x2 matrices `g = [[x0, x1], [x2, x3]]` by `(u, v) -> u g - g v`.
///
/// The action is exact with lagrangian stabilizers wherever `det g != 0`.
pub fn cartan_action_gl2() -> ActionCourant {
    let d = crate::qlie::k_plus_kbar(&crate::qlie::gl2_trace());
    let n = 4;
    let x = |i: usize| Poly::var(n, i);
    let gm = [[x(0), x(1)], [x(2), x(3)]];
    let mut anchors = Vec::new();
    for side in 0..2 {
        for b in &crate::qlie::gl2_matrix().basis {
            let mut f = vec![Poly::zero(n); 4];
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = Poly::zero(n);
                    for k in 0..2 {
                        if side == 0 {
                            s = s.add(&gm[k][j].scale(&b[(i, k)]));
                        } else {
                            s = s.sub(&gm[i][k].scale(&b[(k, j)]));
                        }
                    }
                    f[2 * i + j] = s;
                }
            }
            anchors.push(f);
        }
    }
    let pts = vec![vec![q(1), q(2), q(3), q(5)], vec![q(2), q(0), q(1), q(1)]];
    ActionCourant::new(d, anchors, &pts).expect("gl2 acts with coisotropic stabilizers")
}

/// Determinant of the chart point of [`cartan_action_gl2`], the polynomial cutting out its dense domain.
pub fn gl2_det() -> Poly {
    let x = |i: usize| Poly::var(4, i);
    x(0).mul(&x(3)).sub(&x(1).mul(&x(2)))
}

/// The Cartan splitting `X -> 1/2 (X g^-1, -g^-1 X)` of [`cartan_action_gl2`].
pub struct CartanSplitting;

fn mat2(x: &[Q]) -> QMat {
    QMat::from_rows(2, &[x[..2].to_vec(), x[2..4].to_vec()])
}

fn flat2(m: &QMat) -> Vec<Q> {
    vec![m[(0, 0)].clone(), m[(0, 1)].clone(), m[(1, 0)].clone(), m[(1, 1)].clone()]
}

impl Splitting for CartanSplitting {
    fn value(&self, x: &[Q], v: &[Q]) -> Vec<Q> {
        let gi = mat2(x).inverse().expect("point in GL2");
        let xv = mat2(v);
        let half = crate::exactla::qf(1, 2);
        let u = xv.mul(&gi).scale(&half);
        let w = gi.mul(&xv).scale(&-half);
        [flat2(&u), flat2(&w)].concat()
    }

    fn deriv(&self, x: &[Q], v: &[Q], w: &[Q]) -> Vec<Q> {
        let gi = mat2(x).inverse().expect("point in GL2");
        let (xv, wv) = (mat2(v), mat2(w));
        let half = crate::exactla::qf(1, 2);
        let u = xv.mul(&gi).mul(&wv).mul(&gi).scale(&-half.clone());
        let r = gi.mul(&wv).mul(&gi).mul(&xv).scale(&half);
        [flat2(&u), flat2(&r)].concat()
    }
}

/// The five Courant axioms evaluated on given sections and a function.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AxiomResult {
    pub leibniz: bool,
    pub jacobi: bool,
    pub invariance: bool,
    pub anchor_hom: bool,
    pub symmetric_part: bool,
}

impl AxiomResult {
    pub fn ok(&self) -> bool {
        self.leibniz && self.jacobi && self.invariance && self.anchor_hom && self.symmetric_part
    }

    /// Name of the first failing axiom.
    pub fn first_failure(&self) -> Option<&'static str> {
        [
            (self.leibniz, "leibniz"),
            (self.jacobi, "jacobi"),
            (self.invariance, "invariance"),
            (self.anchor_hom, "anchor_hom"),
            (self.symmetric_part, "symmetric_part"),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, n)| n)
    }
}

pub fn check_axioms<C: CourantAlgebroid>(
    ca: &C,
    e1: &[Poly],
    e2: &[Poly],
    e3: &[Poly],
    f: &Poly,
) -> Result<AxiomResult, CourantError> {
    let b12 = ca.bracket(e1, e2)?;
    let fe2 = vec_mul(f, e2);
    let lhs = ca.bracket(e1, &fe2)?;
    let rhs = vec_add(&vec_mul(f, &b12), &vec_mul(&vf_apply(&ca.anchor(e1), f), e2));
    let leibniz = vec_sub(&lhs, &rhs).iter().all(Poly::is_zero);

    let b23 = ca.bracket(e2, e3)?;
    let b13 = ca.bracket(e1, e3)?;
    let j = vec_sub(&ca.bracket(e1, &b23)?, &vec_add(&ca.bracket(&b12, e3)?, &ca.bracket(e2, &b13)?));
    let jacobi = vec_is_zero(&j);

    let inv = vf_apply(&ca.anchor(e1), &ca.pairing(e2, e3)).sub(&ca.pairing(&b12, e3).add(&ca.pairing(e2, &b13)));
    let invariance = inv.is_zero();

    let anchor_hom = vec_is_zero(&vec_sub(&ca.anchor(&b12), &vf_bracket(&ca.anchor(e1), &ca.anchor(e2))));

    let b21 = ca.bracket(e2, e1)?;
    let symmetric_part = vec_is_zero(&vec_sub(&vec_add(&b12, &b21), &ca.d_op(&ca.pairing(e1, e2))));
    Ok(AxiomResult { leibniz, jacobi, invariance, anchor_hom, symmetric_part })
}

/// Run the axiom suite on `trials` random section triples of polynomial degree at most `deg`.
pub fn axiom_suite<C: CourantAlgebroid, R: Rng>(ca: &C, trials: usize, deg: u32, rng: &mut R) -> Result<(usize, Option<String>), CourantError> {
    let n = ca.chart_dim();
    for t in 0..trials {
        let sec = |rng: &mut R| (0..ca.rank()).map(|_| Poly::random(n, deg, rng)).collect::<Vec<_>>();
        let (e1, e2, e3) = (sec(rng), sec(rng), sec(rng));
        let f = Poly::random(n, deg, rng);
        let r = check_axioms(ca, &e1, &e2, &e3, &f)?;
        if let Some(name) = r.first_failure() {
            return Ok((t + 1, Some(format!("trial {t}: {name}"))));
        }
    }
    Ok((trials, None))
}

/// Check that `tau_B` intertwines brackets and pairings of `T_eta` and `T_{eta - dB}`.
pub fn gauge_check(ca: &ProductCourant, b: &PolyForm, e1: &[Poly], e2: &[Poly]) -> Result<bool, CourantError> {
    let target = ca.gauged(b)?;
    let (t1, t2) = (ca.gauge_section(b, e1), ca.gauge_section(b, e2));
    let lhs = target.bracket(&t1, &t2)?;
    let rhs = ca.gauge_section(b, &ca.bracket(e1, e2)?);
    Ok(lhs == rhs && target.pairing(&t1, &t2) == ca.pairing(e1, e2))
}

/// Where a frame is asserted to have full rank.
#[derive(Clone, Debug)]
pub enum Domain {
    Everywhere,
    /// Points where the polynomial does not vanish.
    NonVanishing(Poly),
}

impl Domain {
    pub fn contains(&self, x: &[Q]) -> bool {
        match self {
            Domain::Everywhere => true,
            Domain::NonVanishing(p) => !p.eval(x).is_zero(),
        }
    }
}

/// Polynomial frame of a candidate Dirac structure.
#[derive(Clone, Debug)]
pub struct DiracFrame {
    pub sections: Vec<Vec<Poly>>,
    pub domain: Domain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Residual identities evaluated on a tensor grid large enough to decide them.
    Exact,
    /// Residuals evaluated at seeded random rational points.
    Sampled { samples: usize, seed: u64 },
}

/// Verdict of [`verify_dirac`].
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DiracVerdict {
    pub lagrangian_rank: bool,
    pub isotropic: bool,
    pub involutive: bool,
    /// Number of points at which residuals were evaluated.
    pub points: usize,
    pub witness: Option<String>,
}

impl DiracVerdict {
    pub fn ok(&self) -> bool {
        self.lagrangian_rank && self.isotropic && self.involutive
    }
}

/// Tensor grid `{0, ..., d}^n`.
pub fn grid_points(n: usize, d: u32) -> Vec<Vec<Q>> {
    let mut pts = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &pts {
            for k in 0..=d {
                let mut p2: Vec<Q> = p.clone();
                p2.push(q(k as i64));
                next.push(p2);
            }
        }
        pts = next;
    }
    pts
}

/// Seeded random rational points with small height.
pub fn random_points(n: usize, count: usize, seed: u64) -> Vec<Vec<Q>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| random_q(&mut rng)).collect()).collect()
}

/// Zero test for a residual polynomial by evaluation, returning the first nonzero point.
fn residual_nonzero_at(p: &Poly, mode: VerifyMode, n: usize, count: &mut usize) -> Option<Vec<Q>> {
    let pts = match mode {
        VerifyMode::Exact => grid_points(n, p.max_var_degree()),
        VerifyMode::Sampled { samples, seed } => random_points(n, samples, seed),
    };
    *count = (*count).max(pts.len());
    pts.into_iter().find(|x| !p.eval(x).is_zero())
}

/// Rank, isotropy and involutivity of a frame.
///
/// Involutivity of a lagrangian frame is decided through the Courant tensor
/// `T(s_i, s_j, s_k) = <[[s_i, s_j]], s_k>`, which vanishes exactly when the
/// bracket of frame sections stays in the span.
pub fn verify_dirac<C: CourantAlgebroid>(ca: &C, frame: &DiracFrame, mode: VerifyMode) -> Result<DiracVerdict, CourantError> {
    let n = ca.chart_dim();
    let s = &frame.sections;
    for e in s {
        if e.len() != ca.rank() {
            return Err(CourantError::SectionLength { expected: ca.rank(), found: e.len() });
        }
    }
    let rank_pts = match mode {
        VerifyMode::Exact => grid_points(n, 2),
        VerifyMode::Sampled { samples, seed } => random_points(n, samples, seed ^ 0x9E37),
    };
    let mut points = 0;
    for x in rank_pts.iter().filter(|x| frame.domain.contains(x)) {
        let cols: Vec<Vec<Q>> = s.iter().map(|e| vec_eval(e, x)).collect();
        if QMat::from_cols(ca.rank(), &cols).rank() < s.len() {
            return Err(CourantError::RankDrop(show(x)));
        }
        points += 1;
    }
    let lagrangian_rank = 2 * s.len() == ca.rank();
    let mut witness = if lagrangian_rank { None } else { Some(format!("frame has {} sections, rank is {}", s.len(), ca.rank())) };

    let mut isotropic = true;
    'iso: for i in 0..s.len() {
        for j in i..s.len() {
            let p = ca.pairing(&s[i], &s[j]);
            if let Some(x) = residual_nonzero_at(&p, mode, n, &mut points) {
                isotropic = false;
                witness.get_or_insert(format!("<s{i}, s{j}> != 0 at {:?}", show(&x)));
                break 'iso;
            }
        }
    }
    let mut involutive = true;
    'inv: for i in 0..s.len() {
        for j in i + 1..s.len() {
            let b = ca.bracket(&s[i], &s[j])?;
            for (k, sk) in s.iter().enumerate() {
                let t = ca.pairing(&b, sk);
                if let Some(x) = residual_nonzero_at(&t, mode, n, &mut points) {
                    involutive = false;
                    witness.get_or_insert(format!("T(s{i}, s{j}, s{k}) != 0 at {:?}", show(&x)));
                    break 'inv;
                }
            }
        }
    }
    Ok(DiracVerdict { lagrangian_rank, isotropic, involutive, points, witness })
}

/// Frame of `TM` inside `TM + T*M`.
pub fn tangent_frame(n: usize) -> DiracFrame {
    let sections = (0..n).map(|i| vcat_poly(&[const_vec(n, &unit(n, i)), vec![Poly::zero(n); n]])).collect();
    DiracFrame { sections, domain: Domain::Everywhere }
}

/// Frame of `graph(B) = tau_B(TM)`.
pub fn graph_frame(b: &PolyForm) -> DiracFrame {
    let n = b.chart_dim();
    let sections = (0..n)
        .map(|i| {
            let x = const_vec(n, &unit(n, i));
            let a = b.interior(&x).one_form_comps();
            vcat_poly(&[x, a])
        })
        .collect();
    DiracFrame { sections, domain: Domain::Everywhere }
}

/// Frame of `graph(pi^sharp)` for a bivector.
pub fn bivector_graph_frame(pi: &PolyMultivector) -> DiracFrame {
    let n = pi.chart_dim();
    let sections = (0..n)
        .map(|i| {
            let a = const_vec(n, &unit(n, i));
            vcat_poly(&[pi.sharp(&a), a])
        })
        .collect();
    DiracFrame { sections, domain: Domain::Everywhere }
}

pub fn vcat_poly(parts: &[Vec<Poly>]) -> Vec<Poly> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

/// Isotropic splitting `s: TM -> E` of an exact action Courant algebroid, known through its 1-jets.
pub trait Splitting {
    /// `s_x(X)` for a constant chart vector `X`.
    fn value(&self, x: &[Q], v: &[Q]) -> Vec<Q>;
    /// Derivative at `x` in direction `w` of `y -> s_y(X)`.
    fn deriv(&self, x: &[Q], v: &[Q], w: &[Q]) -> Vec<Q>;
}

/// Splitting with polynomial matrix entries, `s(X) = S X`.
pub struct PolySplitting {
    /// `s[a][i]`: component `a` of `s(d/dx_i)`.
    pub s: Vec<Vec<Poly>>,
}

impl Splitting for PolySplitting {
    fn value(&self, x: &[Q], v: &[Q]) -> Vec<Q> {
        self.s.iter().map(|row| row.iter().zip(v).fold(Q::zero(), |acc, (p, vi)| acc + p.eval(x) * vi)).collect()
    }

    fn deriv(&self, x: &[Q], v: &[Q], w: &[Q]) -> Vec<Q> {
        self.s
            .iter()
            .map(|row| {
                row.iter().zip(v).fold(Q::zero(), |acc, (p, vi)| {
                    acc + w.iter().enumerate().fold(Q::zero(), |s, (j, wj)| s + p.deriv(j).eval(x) * wj) * vi
                })
            })
            .collect()
    }
}

/// `s'(X) = s(X) - a*(i_X B)`, the splitting transported by the gauge transformation `tau_B`.
pub struct ShiftedSplitting<'a, S: Splitting> {
    pub base: &'a S,
    pub b: &'a PolyForm,
    pub ca: &'a ActionCourant,
}

impl<S: Splitting> ShiftedSplitting<'_, S> {
    fn shift(&self, x: &[Q], v: &[Q], xd: Option<&[Q]>) -> Vec<Q> {
        // -G^-1 (B(v, a(e_i)))_i, or its derivative in direction xd.
        let n = self.ca.n;
        let m = self.ca.d.dim();
        let raw: Vec<Q> = (0..m)
            .map(|i| {
                let ai = &self.ca.anchors[i];
                match xd {
                    None => self.b.eval(x, &[v.to_vec(), vec_eval(ai, x)]),
                    Some(w) => {
                        let dai: Vec<Q> = ai.iter().map(|p| (0..n).fold(Q::zero(), |s, j| s + p.deriv(j).eval(x) * &w[j])).collect();
                        let mut db = Q::zero();
                        for (idx, c) in self.b.components() {
                            let dc = (0..n).fold(Q::zero(), |s, j| s + c.deriv(j).eval(x) * &w[j]);
                            let single = PolyForm::from_components(n, 2, &[(idx.clone(), Poly::one(n))]).expect("2-form");
                            db += dc * single.eval(x, &[v.to_vec(), vec_eval(ai, x)]);
                        }
                        db + self.b.eval(x, &[v.to_vec(), dai])
                    }
                }
            })
            .collect();
        self.ca.ginv.mul_vec(&raw).into_iter().map(|c| -c).collect()
    }
}

impl<S: Splitting> Splitting for ShiftedSplitting<'_, S> {
    fn value(&self, x: &[Q], v: &[Q]) -> Vec<Q> {
        crate::exactla::vadd(&self.base.value(x, v), &self.shift(x, v, None))
    }

    fn deriv(&self, x: &[Q], v: &[Q], w: &[Q]) -> Vec<Q> {
        crate::exactla::vadd(&self.base.deriv(x, v, w), &self.shift(x, v, Some(w)))
    }
}

/// `eta(X, Y, Z) = <[[sX, sY]], sZ>` at a point, as a constant 3-form.
///
/// With constant chart vectors the formula reduces to
/// `<[sX, sY], sZ> + <D_X sY, sZ> - <D_Y sX, sZ> + <D_Z sX, sY>`.
pub fn splitting_to_eta<S: Splitting>(ca: &ActionCourant, s: &S, x: &[Q]) -> Result<PolyForm, CourantError> {
    let n = ca.n;
    let d = &ca.d;
    let e: Vec<Vec<Q>> = (0..n).map(|i| unit(n, i)).collect();
    let sv: Vec<Vec<Q>> = e.iter().map(|v| s.value(x, v)).collect();
    let am = ca.anchor_matrix(x);
    for i in 0..n {
        if am.mul_vec(&sv[i]) != e[i] {
            return Err(CourantError::BadSplitting(show(x)));
        }
        for j in i..n {
            if !d.pair(&sv[i], &sv[j]).is_zero() {
                return Err(CourantError::BadSplitting(show(x)));
            }
        }
    }
    let ds = |i: usize, j: usize| s.deriv(x, &e[i], &e[j]);
    let mut comps = Vec::new();
    for idx in crate::polycal::index_sets(n, 3) {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let v = d.pair(&d.lie.bracket(&sv[i], &sv[j]), &sv[k]) + d.pair(&ds(j, i), &sv[k]) - d.pair(&ds(i, j), &sv[k])
            + d.pair(&ds(i, k), &sv[j]);
        comps.push((idx, Poly::constant(n, v)));
    }
    Ok(PolyForm::from_components(n, 3, &comps)?)
}

/// `lambda = s*` as the matrix `lambda[i][a] = <e_a, s(d/dx_i)>`.
pub fn lambda_from_splitting<S: Splitting>(ca: &ActionCourant, s: &S, x: &[Q]) -> QMat {
    let n = ca.n;
    let rows: Vec<Vec<Q>> = (0..n).map(|i| ca.d.form.gram().mul_vec(&s.value(x, &unit(n, i)))).collect();
    QMat::from_rows(ca.d.dim(), &rows)
}

/// Inverse of [`lambda_from_splitting`]: columns are `s(d/dx_i)`.
pub fn splitting_from_lambda(ca: &ActionCourant, lambda: &QMat) -> QMat {
    ca.ginv.mul(&lambda.transpose())
}

/// Graph of `Lambda^sharp` for quasi-Poisson data inside `TM + T*M + d`, with `d` the double of `b`.
pub fn qpoisson_encode(pi: &PolyMultivector, rho: &[VectorField], b: &LieQuasiBialgebra) -> Result<(ProductCourant, DiracFrame), CourantError> {
    let n = pi.chart_dim();
    let m = b.dim();
    assert_eq!(rho.len(), m, "one action field per basis vector");
    let d = drinfeld_double(b)?;
    let ca = ProductCourant::new(n, None, Some(d))?;
    let mut sections = Vec::new();
    for i in 0..n {
        let a = const_vec(n, &unit(n, i));
        let rho_star: Vec<Poly> = rho.iter().map(|r| r[i].neg()).collect();
        sections.push(vcat_poly(&[pi.sharp(&a), a, vec![Poly::zero(n); m], rho_star]));
    }
    for (k, r) in rho.iter().enumerate() {
        sections.push(vcat_poly(&[r.clone(), vec![Poly::zero(n); n], const_vec(n, &unit(m, k)), vec![Poly::zero(n); m]]));
    }
    Ok((ca, DiracFrame { sections, domain: Domain::Everywhere }))
}

/// Pointwise decoding of a frame in `TM + T*M + (g + g*)` into `(pi, rho)` at `x`.
pub fn qpoisson_decode_at(frame: &DiracFrame, n: usize, m: usize, x: &[Q]) -> Result<(QMat, QMat), CourantError> {
    let amb = 2 * n + 2 * m;
    let vecs: Vec<Vec<Q>> = frame.sections.iter().map(|e| vec_eval(e, x)).collect();
    let l = Subspace::span(amb, &vecs).expect("frame length");
    let fail = |reason: String| CourantError::NotQuasiPoisson { point: show(x), reason };
    // K = L n (TM x d): covector part zero.
    let no_cov = Subspace::span(
        amb,
        &(0..amb).filter(|&i| i < n || i >= 2 * n).map(|i| unit(amb, i)).collect::<Vec<_>>(),
    )
    .expect("ambient");
    let k = l.meet(&no_cov);
    let proj_d: Vec<Vec<Q>> = k.basis().iter().map(|v| v[2 * n..].to_vec()).collect();
    let img = Subspace::span(2 * m, &proj_d).expect("d length");
    let g = Subspace::span(2 * m, &(0..m).map(|i| unit(2 * m, i)).collect::<Vec<_>>()).expect("d length");
    if img != g || k.dim() != m {
        return Err(fail(format!("L n (TM x d) -> d has image of dimension {} and kernel of dimension {}", img.dim(), k.dim() - img.dim())));
    }
    let kb = k.basis_matrix();
    let dpart = QMat::from_rows(kb.cols, &(2 * n..2 * n + m).map(|i| kb.row(i).to_vec()).collect::<Vec<_>>());
    let mut rho = QMat::zeros(n, m);
    for a in 0..m {
        let c = dpart.solve(&unit(m, a)).ok_or_else(|| fail("missing generator".into()))?;
        let v = kb.mul_vec(&c);
        for i in 0..n {
            rho[(i, a)] = v[i].clone();
        }
    }
    let gstar = Subspace::span(2 * m, &(m..2 * m).map(|i| unit(2 * m, i)).collect::<Vec<_>>()).expect("d length");
    let pi = crate::relations::bivector_from_complement(&l, n, &gstar).map_err(|e| fail(e.to_string()))?;
    Ok((pi, rho))
}

/// Tensor-grid Lagrange interpolation of values given on `{0..d}^n` (in [`grid_points`] order).
pub fn interpolate_grid(n: usize, d: u32, values: &[Q]) -> Poly {
    let nodes: Vec<Q> = (0..=d).map(|k| q(k as i64)).collect();
    // Univariate Lagrange basis polynomials in one variable, embedded in n variables.
    let basis = |var: usize, a: usize| -> Poly {
        let mut p = Poly::one(n);
        for (b, nb) in nodes.iter().enumerate() {
            if b != a {
                let den = (&nodes[a] - nb).recip();
                p = p.mul(&Poly::var(n, var).sub(&Poly::constant(n, nb.clone())).scale(&den));
            }
        }
        p
    };
    let per: Vec<Vec<Poly>> = (0..n).map(|v| (0..=d as usize).map(|a| basis(v, a)).collect()).collect();
    let mut r = Poly::zero(n);
    let size = d as usize + 1;
    for (idx, val) in values.iter().enumerate() {
        if val.is_zero() {
            continue;
        }
        let mut t = Poly::constant(n, val.clone());
        let mut rest = idx;
        let mut digits = vec![0; n];
        for v in (0..n).rev() {
            digits[v] = rest % size;
            rest /= size;
        }
        for v in 0..n {
            t = t.mul(&per[v][digits[v]]);
        }
        r = r.add(&t);
    }
    r
}

/// Decoded quasi-Poisson data.
#[derive(Clone, Debug)]
pub struct QPoissonData {
    pub pi: PolyMultivector,
    pub rho: Vec<VectorField>,
}

/// Decode a frame into polynomial `(pi, rho)` of per-variable degree at most `deg`.
///
/// Values are decoded on the tensor grid and interpolated, then confirmed at
/// seeded off-grid points.
pub fn qpoisson_decode(frame: &DiracFrame, n: usize, m: usize, deg: u32, seed: u64) -> Result<QPoissonData, CourantError> {
    let pts = grid_points(n, deg);
    let mut pis = Vec::new();
    let mut rhos = Vec::new();
    for x in &pts {
        let (p, r) = qpoisson_decode_at(frame, n, m, x)?;
        pis.push(p);
        rhos.push(r);
    }
    let interp = |f: &dyn Fn(usize) -> Q| interpolate_grid(n, deg, &(0..pts.len()).map(f).collect::<Vec<_>>());
    let mut pim = vec![vec![Poly::zero(n); n]; n];
    for i in 0..n {
        for j in 0..n {
            pim[i][j] = interp(&|t| pis[t][(i, j)].clone());
        }
    }
    let rho: Vec<VectorField> = (0..m).map(|a| (0..n).map(|i| interp(&|t| rhos[t][(i, a)].clone())).collect()).collect();
    let pi = PolyMultivector::bivector_from_matrix(&pim);
    for x in random_points(n, 4, seed) {
        let (p, r) = qpoisson_decode_at(frame, n, m, &x)?;
        let ok_pi = (0..n).all(|i| (0..n).all(|j| pim[i][j].eval(&x) == p[(i, j)]));
        let ok_rho = (0..m).all(|a| (0..n).all(|i| rho[a][i].eval(&x) == r[(i, a)]));
        if !(ok_pi && ok_rho) {
            return Err(CourantError::NotQuasiPoisson { point: show(&x), reason: format!("decoded data is not polynomial of degree {deg}") });
        }
    }
    Ok(QPoissonData { pi, rho })
}

/// Linear Lie-Poisson bivector on `g* = R^m`, `pi(dx_i, dx_j) = sum_k c_ij^k x_k`.
pub fn lie_poisson(g: &crate::qlie::LieAlgebra) -> PolyMultivector {
    let m = g.dim();
    let mut comps = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let p = (0..m).fold(Poly::zero(m), |s, k| s.add(&Poly::var(m, k).scale(g.c(i, j, k))));
            comps.push((vec![i, j], p));
        }
    }
    PolyMultivector::from_components(m, 2, &comps).expect("bivector")
}

/// Coadjoint action of `g` on `g* = R^m` as linear vector fields.
pub fn coadjoint_action(g: &crate::qlie::LieAlgebra) -> Vec<VectorField> {
    let m = g.dim();
    (0..m)
        .map(|a| (0..m).map(|k| (0..m).fold(Poly::zero(m), |s, j| s.add(&Poly::var(m, j).scale(g.c(a, k, j))))).collect())
        .collect()
}

/// `(c0 + c1 C) pi_LP` on `g* = R^m`, with `C` the quadratic Casimir built from the inverse gram.
pub fn casimir_scaled_lie_poisson(g: &QuadLieAlgebra, c0: Q, c1: Q) -> PolyMultivector {
    let m = g.dim();
    let ginv = g.form.gram().inverse().expect("nondegenerate gram");
    let mut cas = Poly::zero(m);
    for i in 0..m {
        for j in 0..m {
            cas = cas.add(&Poly::var(m, i).mul(&Poly::var(m, j)).scale(&ginv[(i, j)]));
        }
    }
    lie_poisson(&g.lie).mul_fn(&Poly::constant(m, c0).add(&cas.scale(&c1)))
}

/// Standard linear action of `sl2` on `R^2` (`n = 2`) and its projectivization on the chart
/// `t = y1 / y2` of `RP^1` (`n = 1`).
pub fn sl2_matrix_action(n: usize) -> Vec<VectorField> {
    let m = crate::qlie::sl2_matrix();
    m.basis
        .iter()
        .map(|a| match n {
            1 => {
                let t = Poly::var(1, 0);
                let lin = Poly::constant(1, a[(0, 1)].clone()).add(&t.scale(&(a[(0, 0)].clone() - a[(1, 1)].clone())));
                vec![lin.sub(&t.mul(&t).scale(&a[(1, 0)]))]
            }
            2 => (0..2).map(|i| (0..2).fold(Poly::zero(2), |acc, j| acc.add(&Poly::var(2, j).scale(&a[(i, j)])))).collect(),
            _ => panic!("charts of dimension 1 or 2"),
        })
        .collect()
}

/// Random quasi-Poisson `sl2`-manifold on a chart of dimension `n`, for either the trivial
/// bialgebra or the `g_Delta` quasi-bialgebra:
///
/// * `n = 3`: `sl2* = R^3` with the coadjoint action and a Casimir-scaled Lie-Poisson bivector;
/// * `n = 2`: the linear action on `R^2` with a constant multiple of `d_0 ^ d_1`;
/// * `n = 1`: the projective action on `RP^1` with the zero bivector.
pub fn random_qpoisson_sl2<R: Rng>(n: usize, rng: &mut R) -> (PolyMultivector, Vec<VectorField>, LieQuasiBialgebra) {
    let g = crate::qlie::sl2_trace();
    let b = if rng.gen_bool(0.5) {
        let zero = vec![Q::zero(); 27];
        LieQuasiBialgebra { lie: g.lie.clone(), f: zero.clone(), chi: zero }
    } else {
        crate::qlie::gdelta_iso(&g).expect("sl2 trace form").bialgebra
    };
    match n {
        3 => {
            let c1 = if rng.gen_bool(0.25) { Q::zero() } else { crate::polycal::random_q(rng) };
            let pi = casimir_scaled_lie_poisson(&g, crate::polycal::random_q(rng), c1);
            (pi, coadjoint_action(&g.lie), b)
        }
        2 => {
            let c = Poly::constant(2, crate::polycal::random_q(rng));
            let pi = PolyMultivector::from_components(2, 2, &[(vec![0, 1], c)]).expect("bivector");
            (pi, sl2_matrix_action(2), b)
        }
        _ => (PolyMultivector::from_components(1, 2, &[]).expect("zero bivector"), sl2_matrix_action(1), b),
    }
}

/// Encode and decode are mutually inverse on `count` random instances from [`random_qpoisson_sl2`],
/// cycling through charts of dimension 1, 2 and 3.
pub fn qpoisson_round_trips<R: Rng>(count: usize, rng: &mut R) -> Result<Option<String>, CourantError> {
    for i in 0..count {
        let n = 1 + i % 3;
        let (pi, rho, b) = random_qpoisson_sl2(n, rng);
        if !qpoisson_conditions(&pi, &rho, &b)? {
            return Ok(Some(format!("instance {i} does not satisfy the quasi-Poisson identities")));
        }
        let (ca, frame) = qpoisson_encode(&pi, &rho, &b)?;
        let v = verify_dirac(&ca, &frame, VerifyMode::Exact)?;
        if !v.ok() {
            return Ok(Some(format!("instance {i}: encoded frame is not Dirac: {:?}", v.witness)));
        }
        let dec = qpoisson_decode(&frame, n, 3, 3, rng.gen())?;
        if dec.pi != pi || dec.rho != rho {
            return Ok(Some(format!("instance {i}: decode does not invert encode")));
        }
    }
    Ok(None)
}

/// On `count` random instances over charts of dimension 2 and 3, perturbed by a single
/// non-invariant term `c x_k d_i ^ d_j`, `verify_dirac` fails with a witness.
/// Returns the first instance that is accepted.
pub fn qpoisson_perturbations_rejected<R: Rng>(count: usize, rng: &mut R) -> Result<Option<String>, CourantError> {
    for i in 0..count {
        let n = 2 + i % 2;
        let (pi, rho, b) = random_qpoisson_sl2(n, rng);
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |c| (a, c))).collect();
        let (a, c) = pairs[rng.gen_range(0..pairs.len())];
        let k = rng.gen_range(0..n);
        let mut coeff = crate::polycal::random_q(rng);
        if coeff.is_zero() {
            coeff = Q::one();
        }
        let term = PolyMultivector::from_components(n, 2, &[(vec![a, c], Poly::var(n, k).scale(&coeff))])?;
        let (ca, frame) = qpoisson_encode(&pi.add(&term), &rho, &b)?;
        let v = verify_dirac(&ca, &frame, VerifyMode::Exact)?;
        if v.ok() || v.witness.is_none() {
            return Ok(Some(format!("perturbed instance {i} accepted")));
        }
    }
    Ok(None)
}

/// The quasi-Poisson identities `1/2 [pi, pi] = rho(chi)` and `L_{rho u} pi = -rho(F u)`.
pub fn qpoisson_conditions(pi: &PolyMultivector, rho: &[VectorField], b: &LieQuasiBialgebra) -> Result<bool, CourantError> {
    let n = pi.chart_dim();
    let m = b.dim();
    let half = crate::exactla::qf(1, 2);
    let lhs = pi.schouten(pi)?.scale(&half);
    let mut comps = Vec::new();
    for idx in crate::polycal::index_sets(n, 3) {
        let mut p = Poly::zero(n);
        for a in 0..m {
            for bb in 0..m {
                for c in 0..m {
                    let chi = &b.chi[(a * m + bb) * m + c];
                    if !chi.is_zero() {
                        p = p.add(&rho[a][idx[0]].mul(&rho[bb][idx[1]]).mul(&rho[c][idx[2]]).scale(chi));
                    }
                }
            }
        }
        comps.push((idx, p));
    }
    if n >= 3 && lhs != PolyMultivector::from_components(n, 3, &comps)? {
        return Ok(false);
    }
    for (u, ru) in rho.iter().enumerate() {
        let lie = pi.lie(ru)?;
        let mut comps = Vec::new();
        for idx in crate::polycal::index_sets(n, 2) {
            let mut p = Poly::zero(n);
            for bb in 0..m {
                for c in 0..m {
                    let f = &b.f[(u * m + bb) * m + c];
                    if !f.is_zero() {
                        p = p.sub(&rho[bb][idx[0]].mul(&rho[c][idx[1]]).scale(f));
                    }
                }
            }
            comps.push((idx, p));
        }
        if lie != PolyMultivector::from_components(n, 2, &comps)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of [`dynamical_r_check`].
#[derive(Clone, Debug)]
pub struct DynamicalReport {
    /// The constant `chi` forced by the data, when it is constant.
    pub chi: Option<Vec<Q>>,
    pub ad_invariant: bool,
    pub dirac: Option<DiracVerdict>,
}

impl DynamicalReport {
    pub fn ok(&self) -> bool {
        self.chi.is_some() && self.ad_invariant && self.dirac.as_ref().map(|d| d.ok()).unwrap_or(false)
    }
}

/// Frame of `graph(Lambda^sharp)`, `Lambda^sharp(a, xi) = (pi^sharp a - theta^sharp* xi, theta^sharp a + r^sharp xi)`.
///
/// `theta[i][a] = theta(dx_i, e^a)` and `r[a][b] = r(e^a, e^b)`.
pub fn dynamical_frame(pi: &PolyMultivector, theta: &[Vec<Poly>], r: &[Vec<Poly>]) -> DiracFrame {
    let n = pi.chart_dim();
    let m = r.len();
    let mut sections = Vec::new();
    for i in 0..n {
        let a = const_vec(n, &unit(n, i));
        sections.push(vcat_poly(&[pi.sharp(&a), a, theta[i].clone(), vec![Poly::zero(n); m]]));
    }
    for b in 0..m {
        let x: Vec<Poly> = (0..n).map(|i| theta[i][b].neg()).collect();
        let rs: Vec<Poly> = (0..m).map(|c| r[b][c].clone()).collect();
        sections.push(vcat_poly(&[x, vec![Poly::zero(n); n], rs, const_vec(n, &unit(m, b))]));
    }
    DiracFrame { sections, domain: Domain::Everywhere }
}

/// Determine `chi` from `Lambda = pi + theta + r` and verify that the graph is Dirac in `TM + T*M + d_chi`.
pub fn dynamical_r_check(
    g: &crate::qlie::LieAlgebra,
    pi: &PolyMultivector,
    theta: &[Vec<Poly>],
    r: &[Vec<Poly>],
    mode: VerifyMode,
) -> Result<DynamicalReport, CourantError> {
    let n = pi.chart_dim();
    let m = g.dim();
    let zero = vec![Q::zero(); m * m * m];
    let b0 = LieQuasiBialgebra { lie: g.clone(), f: zero.clone(), chi: zero };
    let ca0 = ProductCourant::new(n, None, Some(drinfeld_double(&b0)?))?;
    let frame = dynamical_frame(pi, theta, r);
    let xi = &frame.sections[n..];
    let mut chi = vec![Q::zero(); m * m * m];
    for a in 0..m {
        for b in 0..m {
            let br = ca0.bracket(&xi[a], &xi[b])?;
            for c in 0..m {
                let t = ca0.pairing(&br, &xi[c]).neg();
                if t.degree().unwrap_or(0) > 0 {
                    return Ok(DynamicalReport { chi: None, ad_invariant: false, dirac: None });
                }
                chi[(a * m + b) * m + c] = t.eval(&vec![Q::zero(); n]);
            }
        }
    }
    let ad_invariant = chi_is_invariant(g, &chi);
    let bchi = LieQuasiBialgebra { lie: g.clone(), f: vec![Q::zero(); m * m * m], chi: chi.clone() };
    let dirac = match drinfeld_double(&bchi) {
        Ok(d) => Some(verify_dirac(&ProductCourant::new(n, None, Some(d))?, &frame, mode)?),
        Err(_) => None,
    };
    Ok(DynamicalReport { chi: Some(chi), ad_invariant, dirac })
}

/// `ad_u chi = 0` for a trivector on `g*` given by components.
pub fn chi_is_invariant(g: &crate::qlie::LieAlgebra, chi: &[Q]) -> bool {
    let m = g.dim();
    let c = |a: usize, b: usize, k: usize| chi[(a * m + b) * m + k].clone();
    (0..m).all(|u| {
        let ad = g.ad(&unit(m, u));
        (0..m).all(|a| {
            (0..m).all(|b| {
                (0..m).all(|k| {
                    // (ad_u chi)(e^a, e^b, e^k) = -chi(ad*_u-dual terms)
                    let mut s = Q::zero();
                    for l in 0..m {
                        s += &ad[(a, l)] * c(l, b, k) + &ad[(b, l)] * c(a, l, k) + &ad[(k, l)] * c(a, b, l);
                    }
                    s.is_zero()
                })
            })
        })
    })
}

/// Monomials used by random frame perturbations.
pub fn monomial_basis(n: usize, deg: u32) -> Vec<Poly> {
    exponents_up_to(n, deg).into_iter().map(|e| Poly::monomial(n, &e, Q::one())).collect()
}

/// Whether two frames span the same subspace at each of the given points.
pub fn frames_agree(a: &DiracFrame, b: &DiracFrame, rank: usize, pts: &[Vec<Q>]) -> bool {
    pts.iter().all(|x| {
        let sa: Vec<Vec<Q>> = a.sections.iter().map(|e| vec_eval(e, x)).collect();
        let sb: Vec<Vec<Q>> = b.sections.iter().map(|e| vec_eval(e, x)).collect();
        Subspace::span(rank, &sa).ok() == Subspace::span(rank, &sb).ok()
    })
}

/// Whether the vector `v` is zero, for callers holding evaluated sections.
pub fn is_zero_section_at(e: &[Poly], x: &[Q]) -> bool {
    is_zero_vec(&vec_eval(e, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlie::sl2_trace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(n: usize, i: usize) -> Poly {
        Poly::var(n, i)
    }

    fn volume3() -> PolyForm {
        PolyForm::from_components(3, 3, &[(vec![0, 1, 2], Poly::one(3))]).unwrap()
    }

    #[test]
    fn standard_and_twisted_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t, w) = axiom_suite(&ProductCourant::standard(3), 3, 2, &mut rng).unwrap();
        assert_eq!((t, w), (3, None));
        let eta = volume3().mul_fn(&x(3, 0));
        let ca = ProductCourant::twisted(eta).unwrap();
        assert_eq!(axiom_suite(&ca, 3, 1, &mut rng).unwrap().1, None);
    }

    #[test]
    fn non_closed_eta_is_rejected() {
        let eta = PolyForm::from_components(4, 3, &[(vec![0, 1, 2], x(4, 3))]).unwrap();
        assert!(matches!(ProductCourant::twisted(eta), Err(CourantError::NotClosed)));
    }

    #[test]
    fn product_with_sl2_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ca = ProductCourant::new(2, None, Some(sl2_trace())).unwrap();
        assert_eq!(axiom_suite(&ca, 2, 2, &mut rng).unwrap().1, None);
    }

    fn cartan_three_form_at(x: &[Q]) -> PolyForm {
        // 1/2 tr(theta X [theta Y, theta Z]) with theta = g^-1 dg and the matrix commutator.
        let gi = mat2(x).inverse().unwrap();
        let th = |i: usize| gi.mul(&mat2(&unit(4, i)));
        let comps: Vec<_> = crate::polycal::index_sets(4, 3)
            .into_iter()
            .map(|idx| {
                let (a, b, c) = (th(idx[0]), th(idx[1]), th(idx[2]));
                let v = a.mul(&b.mul(&c).sub(&c.mul(&b))).trace() * crate::exactla::qf(1, 2);
                (idx, Poly::constant(4, v))
            })
            .collect();
        PolyForm::from_components(4, 3, &comps).unwrap()
    }

    #[test]
    fn cartan_splitting_gives_cartan_form() {
        let ca = cartan_action_gl2();
        for x in [vec![q(1), q(2), q(3), q(5)], vec![q(2), q(-1), q(1), q(1)]] {
            let eta = splitting_to_eta(&ca, &CartanSplitting, &x).unwrap();
            assert_eq!(eta, cartan_three_form_at(&x));
            let lambda = lambda_from_splitting(&ca, &CartanSplitting, &x);
            let back = splitting_from_lambda(&ca, &lambda);
            for i in 0..4 {
                assert_eq!(back.col(i), CartanSplitting.value(&x, &unit(4, i)));
            }
        }
    }

    #[test]
    fn shifted_splitting_changes_eta_by_db() {
        let ca = cartan_action_gl2();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = PolyForm::random(4, 2, 2, &mut rng).unwrap();
        let db = b.d().unwrap();
        let sh = ShiftedSplitting { base: &CartanSplitting, b: &b, ca: &ca };
        for x in [vec![q(1), q(2), q(3), q(5)], vec![q(1), q(0), q(-2), q(3)]] {
            let eta = splitting_to_eta(&ca, &CartanSplitting, &x).unwrap();
            let eta2 = splitting_to_eta(&ca, &sh, &x).unwrap();
            let n = 4;
            let at: Vec<_> = db.components().map(|(i, c)| (i.clone(), Poly::constant(n, c.eval(&x)))).collect();
            let db_x = PolyForm::from_components(n, 3, &at).unwrap();
            assert_eq!(eta2, eta.sub(&db_x));
        }
    }

    #[test]
    fn non_isotropic_splitting_is_rejected() {
        let ca = cartan_action_gl2();
        let s = PolySplitting { s: (0..8).map(|a| (0..4).map(|i| Poly::constant(4, if a == i { q(1) } else { q(0) })).collect()).collect() };
        assert!(matches!(splitting_to_eta(&ca, &s, &[q(1), q(0), q(0), q(1)]), Err(CourantError::BadSplitting(_))));
    }

    #[test]
    fn coadjoint_action_is_not_exact() {
        // g + g* with zero cobracket acting on g* = R^3: g coadjointly, g* trivially.
        let g = sl2_trace().lie;
        let m = g.dim();
        let zero = vec![Q::zero(); m * m * m];
        let d = drinfeld_double(&LieQuasiBialgebra { lie: g.clone(), f: zero.clone(), chi: zero }).unwrap();
        let n = 3;
        let mut anchors = Vec::new();
        for a in 0..2 * m {
            let mut f = vec![Poly::zero(n); n];
            if a < m {
                for (k, fk) in f.iter_mut().enumerate() {
                    for j in 0..m {
                        let c = g.c(a, k, j);
                        if !c.is_zero() {
                            *fk = fk.add(&x(n, j).scale(c));
                        }
                    }
                }
            }
            anchors.push(f);
        }
        let p = [q(1), q(2), q(3)];
        let ca = ActionCourant::new(d, anchors, &[p.to_vec()]).unwrap();
        assert!(!ca.is_exact_at(&p));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(axiom_suite(&ca, 2, 2, &mut rng).unwrap().1, None);
    }

    #[test]
    fn quasi_poisson_suites() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(qpoisson_round_trips(3, &mut rng).unwrap(), None);
        assert_eq!(qpoisson_perturbations_rejected(3, &mut rng).unwrap(), None);
    }

    #[test]
    fn matrix_actions_are_homomorphisms() {
        let g = sl2_trace();
        for n in [1, 2] {
            let rho = sl2_matrix_action(n);
            for a in 0..3 {
                for b in 0..3 {
                    let lhs = crate::polycal::vf_bracket(&rho[a], &rho[b]);
                    let rhs = (0..3).fold(vec![Poly::zero(n); n], |acc, k| vec_add(&acc, &rho[k].iter().map(|p| p.scale(g.lie.c(a, b, k))).collect::<Vec<_>>()));
                    assert_eq!(lhs, rhs, "n = {n}, ({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn quasi_poisson_round_trip() {
        let g = sl2_trace();
        let m = 3;
        let zero = vec![Q::zero(); m * m * m];
        let b0 = LieQuasiBialgebra { lie: g.lie.clone(), f: zero.clone(), chi: zero };
        let bd = crate::qlie::gdelta_iso(&g).unwrap().bialgebra;
        let rho = coadjoint_action(&g.lie);
        for b in [&b0, &bd] {
            let pi = casimir_scaled_lie_poisson(&g, q(2), q(-1));
            assert!(qpoisson_conditions(&pi, &rho, b).unwrap());
            let (ca, frame) = qpoisson_encode(&pi, &rho, b).unwrap();
            assert!(verify_dirac(&ca, &frame, VerifyMode::Exact).unwrap().ok());
            let dec = qpoisson_decode(&frame, 3, 3, 3, 7).unwrap();
            assert_eq!(dec.pi, pi);
            assert_eq!(dec.rho, rho);
            let bad = pi.add(&PolyMultivector::from_components(3, 2, &[(vec![0, 1], x(3, 0))]).unwrap());
            assert!(!qpoisson_conditions(&bad, &rho, b).unwrap());
            let (ca, frame) = qpoisson_encode(&bad, &rho, b).unwrap();
            let v = verify_dirac(&ca, &frame, VerifyMode::Exact).unwrap();
            assert!(v.isotropic && !v.involutive);
        }
    }

    #[test]
    fn dynamical_r_matrices() {
        let g = sl2_trace().lie;
        let n = 1;
        let pi = PolyMultivector::zero(n, 2).unwrap();
        let theta = vec![vec![Poly::zero(n); 3]];
        // r = e ^ f
        let mut r = vec![vec![Poly::zero(n); 3]; 3];
        r[0][1] = Poly::one(n);
        r[1][0] = Poly::one(n).neg();
        let rep = dynamical_r_check(&g, &pi, &theta, &r, VerifyMode::Exact).unwrap();
        assert!(rep.ok(), "{rep:?}");
        assert!(rep.chi.as_ref().unwrap().iter().any(|c| !c.is_zero()));
        let zero = vec![vec![Poly::zero(n); 3]; 3];
        let rep = dynamical_r_check(&g, &pi, &theta, &zero, VerifyMode::Exact).unwrap();
        assert!(rep.ok() && rep.chi.unwrap().iter().all(|c| c.is_zero()));
        // A non-constant r forces a non-constant chi.
        let mut rx = zero.clone();
        rx[0][2] = x(n, 0);
        rx[2][0] = x(n, 0).neg();
        rx[1][2] = Poly::one(n);
        rx[2][1] = Poly::one(n).neg();
        let rep = dynamical_r_check(&g, &pi, &theta, &rx, VerifyMode::Exact).unwrap();
        assert!(!rep.ok());
    }

    #[test]
    fn non_invariant_chi_is_reported() {
        let g = crate::qlie::gl2_trace().lie;
        let n = 1;
        let pi = PolyMultivector::zero(n, 2).unwrap();
        let theta = vec![vec![Poly::zero(n); 4]];
        let mut found = false;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut r = vec![vec![Poly::zero(n); 4]; 4];
            for a in 0..4 {
                for b in a + 1..4 {
                    let c = Poly::constant(n, q(rng.gen_range(-2..=2)));
                    r[b][a] = c.neg();
                    r[a][b] = c;
                }
            }
            let rep = dynamical_r_check(&g, &pi, &theta, &r, VerifyMode::Exact).unwrap();
            if rep.chi.is_some() && !rep.ad_invariant {
                assert!(!rep.ok());
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn cartan_action_axioms_and_exactness() {
        let ca = cartan_action_gl2();
        assert!(ca.is_exact_at(&[q(1), q(2), q(3), q(5)]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(axiom_suite(&ca, 2, 1, &mut rng).unwrap().1, None);
    }

    #[test]
    fn gauge_transformation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ca = ProductCourant::twisted(volume3()).unwrap();
        let b = PolyForm::random(3, 2, 2, &mut rng).unwrap();
        for _ in 0..2 {
            let e1 = ca.random_section(2, &mut rng);
            let e2 = ca.random_section(2, &mut rng);
            assert!(gauge_check(&ca, &b, &e1, &e2).unwrap());
        }
        let target = ProductCourant::standard(3).gauged(&b).unwrap();
        assert!(verify_dirac(&target, &graph_frame(&b), VerifyMode::Exact).unwrap().ok());
        let b2 = PolyForm::random(3, 2, 1, &mut rng).unwrap();
        let s = ca.random_section(1, &mut rng);
        assert_eq!(ca.gauge_section(&b, &ca.gauge_section(&b2, &s)), ca.gauge_section(&b.add(&b2), &s));
    }

    #[test]
    fn poisson_graphs() {
        let n = 3;
        let pi = PolyMultivector::from_components(n, 2, &[(vec![0, 1], x(n, 2)), (vec![1, 2], x(n, 0)), (vec![2, 0], x(n, 1))]).unwrap();
        let ca = ProductCourant::standard(n);
        assert!(verify_dirac(&ca, &bivector_graph_frame(&pi), VerifyMode::Exact).unwrap().ok());
        let bad = pi.add(&PolyMultivector::from_components(n, 2, &[(vec![0, 1], x(n, 0))]).unwrap());
        let v = verify_dirac(&ca, &bivector_graph_frame(&bad), VerifyMode::Sampled { samples: 8, seed: 1 }).unwrap();
        assert!(v.isotropic && !v.involutive && v.witness.is_some());
        assert!(verify_dirac(&ca, &tangent_frame(n), VerifyMode::Exact).unwrap().ok());
    }

    #[test]
    fn closed_graph_and_rank_drop() {
        let n = 2;
        let ca = ProductCourant::standard(n);
        let frame = DiracFrame {
            sections: vec![vcat_poly(&[vec![x(n, 0), Poly::zero(n)], vec![Poly::zero(n); 2]]), vcat_poly(&[vec![Poly::zero(n), Poly::one(n)], vec![Poly::zero(n); 2]])],
            domain: Domain::Everywhere,
        };
        assert!(matches!(verify_dirac(&ca, &frame, VerifyMode::Exact), Err(CourantError::RankDrop(_))));
        let frame = DiracFrame { domain: Domain::NonVanishing(x(n, 0)), ..frame };
        assert!(verify_dirac(&ca, &frame, VerifyMode::Exact).unwrap().ok());
    }

    #[test]
    fn interpolation_recovers_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = Poly::random(2, 2, &mut rng);
        let vals: Vec<Q> = grid_points(2, 2).iter().map(|x| p.eval(x)).collect();
        assert_eq!(interpolate_grid(2, 2, &vals), p);
    }
}
