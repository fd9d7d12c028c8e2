//! Linear Courant relations and fibrewise Dirac reduction.
//!
//! Fibres are finite-dimensional quadratic vector spaces over the rationals.
//! A relation `R: E1 --> E2` is a subspace of `E1 + E2`, lagrangian for the
//! form `q1 + (-q2)`. Everything here is exact.

use crate::exactla::{unit, vcat, LagClass, LinAlgError, QForm, QMat, Subspace, Q};
use num::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelError {
    #[error("{what} is {class:?}, expected lagrangian")]
    NotLagrangian { what: &'static str, class: LagClass },
    #[error("the map onto k is not surjective (image dimension {image} of {expected})")]
    Transversality { image: usize, expected: usize },
    #[error("composite is not a graph over the covector for dx_{0}")]
    NotGraph(usize),
    #[error("composite bivector is not skew at ({0}, {1})")]
    NotSkew(usize, usize),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

fn require_lagrangian(q: &QForm, s: &Subspace, what: &'static str) -> Result<(), RelError> {
    let class = q.lagrangian_class(s)?;
    if class != LagClass::Lagrangian {
        return Err(RelError::NotLagrangian { what, class });
    }
    Ok(())
}

/// Split a vector of `E1 + E2` into its two parts.
fn split(v: &[Q], n1: usize) -> (&[Q], &[Q]) {
    v.split_at(n1)
}

/// Lagrangian subspace of `E1 + E2bar`.
#[derive(Clone, Debug)]
pub struct LinearCourantRelation {
    pub q1: QForm,
    pub q2: QForm,
    pub r: Subspace,
}

impl LinearCourantRelation {
    pub fn new(q1: QForm, q2: QForm, r: Subspace) -> Result<Self, RelError> {
        if r.ambient() != q1.dim() + q2.dim() {
            return Err(LinAlgError::DimensionMismatch { expected: q1.dim() + q2.dim(), found: r.ambient() }.into());
        }
        require_lagrangian(&q1.direct_sum(&q2.neg()), &r, "relation")?;
        Ok(LinearCourantRelation { q1, q2, r })
    }

    /// Graph of a linear map `E1 -> E2`; lagrangian exactly when the map is orthogonal.
    pub fn graph(q1: QForm, q2: QForm, m: &QMat) -> Result<Self, RelError> {
        let n1 = q1.dim();
        let vecs: Vec<Vec<Q>> = (0..n1).map(|i| vcat(&[&unit(n1, i), &m.col(i)])).collect();
        let r = Subspace::span(n1 + q2.dim(), &vecs)?;
        Self::new(q1, q2, r)
    }

    /// `R(L) = {y : (x, y) in R for some x in L}`.
    pub fn apply(&self, l: &Subspace) -> Subspace {
        let n1 = self.q1.dim();
        let n2 = self.q2.dim();
        let big = l.product(&Subspace::full(n2));
        let meet = self.r.meet(&big);
        let vecs: Vec<Vec<Q>> = meet.basis().iter().map(|v| split(v, n1).1.to_vec()).collect();
        Subspace::span(n2, &vecs).expect("E2 length")
    }
}

/// Result of composing two relations.
#[derive(Clone, Debug)]
pub struct Composite {
    pub relation: Subspace,
    /// The composite has the lagrangian dimension `(dim E1 + dim E3) / 2`.
    pub clean: bool,
    pub lagrangian: bool,
}

/// `R23 o R12`.
pub fn compose(r23: &LinearCourantRelation, r12: &LinearCourantRelation) -> Result<Composite, RelError> {
    let (n1, n2, n3) = (r12.q1.dim(), r12.q2.dim(), r23.q2.dim());
    if r23.q1.dim() != n2 {
        return Err(LinAlgError::DimensionMismatch { expected: n2, found: r23.q1.dim() }.into());
    }
    let b12 = r12.r.basis();
    let b23 = r23.r.basis();
    let (k12, k23) = (b12.len(), b23.len());
    // Unknowns (a, b) with y-part(B12 a) = y-part(B23 b).
    let mut m = QMat::zeros(n2, k12 + k23);
    for (j, v) in b12.iter().enumerate() {
        for i in 0..n2 {
            m[(i, j)] = v[n1 + i].clone();
        }
    }
    for (j, v) in b23.iter().enumerate() {
        for i in 0..n2 {
            m[(i, k12 + j)] = -v[i].clone();
        }
    }
    let vecs: Vec<Vec<Q>> = m
        .kernel()
        .iter()
        .map(|k| {
            let mut x = vec![Q::zero(); n1];
            let mut z = vec![Q::zero(); n3];
            for (j, v) in b12.iter().enumerate() {
                for i in 0..n1 {
                    x[i] += &k[j] * &v[i];
                }
            }
            for (j, v) in b23.iter().enumerate() {
                for i in 0..n3 {
                    z[i] += &k[k12 + j] * &v[n2 + i];
                }
            }
            vcat(&[&x, &z])
        })
        .collect();
    let relation = Subspace::span(n1 + n3, &vecs)?;
    let clean = 2 * relation.dim() == n1 + n3;
    let lagrangian = r12.q1.direct_sum(&r23.q2.neg()).lagrangian_class(&relation)? == LagClass::Lagrangian;
    Ok(Composite { relation, clean, lagrangian })
}

/// Outcome of a Manin-morphism check `R: (E1, L1) --> (E2, L2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ManinCheck {
    /// `R n (L1 x E2) -> E2` is injective.
    pub injective: bool,
    /// Its image equals `L2`.
    pub image_equals: bool,
    /// A kernel vector or a vector of the image outside `L2` (or of `L2` outside the image).
    pub witness: Option<Vec<Q>>,
}

impl ManinCheck {
    pub fn ok(&self) -> bool {
        self.injective && self.image_equals
    }
}

pub fn manin_morphism_check(r: &LinearCourantRelation, l1: &Subspace, l2: &Subspace) -> ManinCheck {
    let n1 = r.q1.dim();
    let n2 = r.q2.dim();
    let s = r.r.meet(&l1.product(&Subspace::full(n2)));
    let zero_e2 = Subspace::full(n1).product(&Subspace::zero(n2));
    let ker = s.meet(&zero_e2);
    let image = r.apply(l1);
    let injective = ker.dim() == 0;
    let image_equals = image == *l2;
    let witness = if let Some(k) = ker.basis().first() {
        Some(k.clone())
    } else if let Some(v) = image.basis().iter().find(|v| !l2.contains(v)) {
        Some(v.clone())
    } else {
        l2.basis().iter().find(|v| !image.contains(v)).cloned()
    };
    ManinCheck { injective, image_equals, witness }
}

/// Two lagrangians `L1 in E1 + k` and `L2 in E2 + kbar`, each laid out with the `k` block last.
#[derive(Clone, Debug)]
pub struct FiberedDiracPair {
    pub q1: QForm,
    pub q2: QForm,
    pub qk: QForm,
    pub l1: Subspace,
    pub l2: Subspace,
}

/// Result of reducing a fibred pair.
#[derive(Clone, Debug)]
pub struct Reduced {
    /// `p(L1 x_k L2)` inside `E1 + E2`.
    pub l: Subspace,
    /// The images of `L1` and `L2` in `k` span `k`.
    pub generated: bool,
    /// `p` restricted to the fibre product is injective.
    pub injective: bool,
    pub lagrangian: bool,
    pub fibre_product_dim: usize,
}

/// Fibre product over `k` followed by the projection to `E1 + E2`.
pub fn reduce(p: &FiberedDiracPair) -> Result<Reduced, RelError> {
    let (n1, n2, nk) = (p.q1.dim(), p.q2.dim(), p.qk.dim());
    require_lagrangian(&p.q1.direct_sum(&p.qk), &p.l1, "first factor")?;
    require_lagrangian(&p.q2.direct_sum(&p.qk.neg()), &p.l2, "second factor")?;
    let b1 = p.l1.basis();
    let b2 = p.l2.basis();
    let (k1, k2) = (b1.len(), b2.len());
    let mut m = QMat::zeros(nk, k1 + k2);
    for (j, v) in b1.iter().enumerate() {
        for i in 0..nk {
            m[(i, j)] = v[n1 + i].clone();
        }
    }
    for (j, v) in b2.iter().enumerate() {
        for i in 0..nk {
            m[(i, k1 + j)] = -v[n2 + i].clone();
        }
    }
    let generated = m.rank() == nk;
    let kernel = m.kernel();
    let fibre_product_dim = kernel.len();
    let vecs: Vec<Vec<Q>> = kernel
        .iter()
        .map(|k| {
            let mut e1 = vec![Q::zero(); n1];
            let mut e2 = vec![Q::zero(); n2];
            for (j, v) in b1.iter().enumerate() {
                for i in 0..n1 {
                    e1[i] += &k[j] * &v[i];
                }
            }
            for (j, v) in b2.iter().enumerate() {
                for i in 0..n2 {
                    e2[i] += &k[k1 + j] * &v[i];
                }
            }
            vcat(&[&e1, &e2])
        })
        .collect();
    let l = Subspace::span(n1 + n2, &vecs)?;
    let injective = l.dim() == fibre_product_dim;
    let lagrangian = p.q1.direct_sum(&p.q2).lagrangian_class(&l)? == LagClass::Lagrangian;
    Ok(Reduced { l, generated, injective, lagrangian, fibre_product_dim })
}

/// Fibre of infinitesimal lagrangian data `(a, lambda, phi)` over a point of `N`.
///
/// Columns index a basis of `A`; `phi_own` lands in the factor kept after the
/// fibre product and `phi_shared` in the factor that is fibred over.
#[derive(Clone, Debug)]
pub struct LagFiber {
    pub a: QMat,
    pub lambda: QMat,
    pub phi_own: QMat,
    pub phi_shared: QMat,
    pub q_own: QForm,
}

impl LagFiber {
    /// Image of `(a, lambda, phi_own, phi_shared)` in `TN + T*N + k_own + k`.
    pub fn image(&self) -> Subspace {
        let m = self.a.vcat(&self.lambda).vcat(&self.phi_own).vcat(&self.phi_shared);
        Subspace::image_of(&m)
    }

    fn form(&self) -> QForm {
        QForm::hyperbolic(self.a.rows).direct_sum(&self.q_own)
    }
}

/// Fibre product of two lagrangian fibres over `k`, in the layout `(TN1 + T*N1 + k1) + (TN2 + T*N2 + k2)`.
pub fn fibred_product(f1: &LagFiber, f2: &LagFiber, qk: &QForm) -> Result<Reduced, RelError> {
    let p = FiberedDiracPair { q1: f1.form(), q2: f2.form(), qk: qk.clone(), l1: f1.image(), l2: f2.image() };
    let r = reduce(&p)?;
    if !r.generated {
        let nk = qk.dim();
        let image = f1.phi_shared.hcat(&f2.phi_shared).rank();
        return Err(RelError::Transversality { image, expected: nk });
    }
    Ok(r)
}

/// `R o C` for `R` inside `(TM + T*M) + E2` and `C` in `E2`, read as a bivector `pi[i][j] = pi(dx_i, dx_j)`.
pub fn bivector_from_complement(r: &Subspace, n: usize, c: &Subspace) -> Result<QMat, RelError> {
    let rc = r.meet(&Subspace::full(2 * n).product(c));
    let comp: Vec<Vec<Q>> = rc.basis().iter().map(|v| v[..2 * n].to_vec()).collect();
    let comp = Subspace::span(2 * n, &comp)?;
    let mut pi = QMat::zeros(n, n);
    // Solve for the element with covector part dx_i, then read off its vector part.
    let b = comp.basis_matrix();
    let cov = QMat::from_rows(b.cols, &(n..2 * n).map(|i| b.row(i).to_vec()).collect::<Vec<_>>());
    if cov.rank() != n || comp.dim() != n {
        let missing = (0..n).find(|&i| cov.solve(&unit(n, i)).is_none()).unwrap_or(0);
        return Err(RelError::NotGraph(missing));
    }
    for i in 0..n {
        let coef = cov.solve(&unit(n, i)).ok_or(RelError::NotGraph(i))?;
        let v = b.mul_vec(&coef);
        for j in 0..n {
            pi[(i, j)] = v[j].clone();
        }
    }
    for i in 0..n {
        for j in 0..=i {
            if pi[(i, j)] != -pi[(j, i)].clone() {
                return Err(RelError::NotSkew(i, j));
            }
        }
    }
    Ok(pi)
}

/// `R_{phi,sigma}` inside `(TN + T*N) + (TM + T*M)` from `T phi` (an `m x n` matrix) and `sigma[i][j] = sigma(d_i, d_j)`.
pub fn r_phi_sigma(dphi: &QMat, sigma: &QMat) -> Subspace {
    let (m, n) = (dphi.rows, dphi.cols);
    let st = sigma.transpose();
    let mut vecs = Vec::new();
    for i in 0..n {
        let y = unit(n, i);
        vecs.push(vcat(&[&y, &st.mul_vec(&y), &dphi.mul_vec(&y), &vec![Q::zero(); m]]));
    }
    let dt = dphi.transpose();
    for i in 0..m {
        let a = unit(m, i);
        vecs.push(vcat(&[&vec![Q::zero(); n], &dt.mul_vec(&a), &vec![Q::zero(); m], &a]));
    }
    Subspace::span(2 * n + 2 * m, &vecs).expect("ambient 2n + 2m")
}

/// Forward-image classification of a map with 2-form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum DiracClass {
    NotDirac,
    Dirac,
    Strong,
}

/// Classify `(phi, sigma): (N, TN) --> (M, L)` at one fibre.
pub fn strong_dirac_check(dphi: &QMat, sigma: &QMat, l: &Subspace) -> Result<(DiracClass, ManinCheck), RelError> {
    let (m, n) = (dphi.rows, dphi.cols);
    let rel = LinearCourantRelation::new(QForm::hyperbolic(n), QForm::hyperbolic(m), r_phi_sigma(dphi, sigma))?;
    let tn = Subspace::span(2 * n, &(0..n).map(|i| unit(2 * n, i)).collect::<Vec<_>>())?;
    let chk = manin_morphism_check(&rel, &tn, l);
    let class = match (chk.image_equals, chk.injective) {
        (true, true) => DiracClass::Strong,
        (true, false) => DiracClass::Dirac,
        _ => DiracClass::NotDirac,
    };
    Ok((class, chk))
}

/// Random orthogonal transformation of `form` by the Cayley transform `(I - A)(I + A)^-1`, `A = G^-1 S` with `S` skew.
pub fn random_orthogonal<R: rand::Rng>(form: &QForm, rng: &mut R) -> QMat {
    let n = form.dim();
    let ginv = form.gram().inverse().expect("nondegenerate form");
    loop {
        let mut s = QMat::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = crate::polycal::random_q(rng);
                s[(j, i)] = -v.clone();
                s[(i, j)] = v;
            }
        }
        let a = ginv.mul(&s);
        let id = QMat::identity(n);
        if let Ok(inv) = id.add(&a).inverse() {
            return id.sub(&a).mul(&inv);
        }
    }
}

/// Random lagrangian in the orbit of `start` under the orthogonal group of `form`.
pub fn random_lagrangian<R: rand::Rng>(form: &QForm, start: &Subspace, rng: &mut R) -> Subspace {
    start.image(&random_orthogonal(form, rng))
}

/// Quadratic spaces `k` used for random fibred pairs, each with a lagrangian subspace.
fn fibre_bases() -> Vec<(QForm, Subspace)> {
    let one = Q::from_integer(1.into());
    let split_k = QForm::diagonal(&[one.clone(), -one.clone(), one.clone(), -one]);
    let split_l = Subspace::span(4, &[vec_sum(&unit(4, 0), &unit(4, 1)), vec_sum(&unit(4, 2), &unit(4, 3))]).expect("ambient 4");
    let double = crate::qlie::k_plus_kbar(&crate::qlie::sl2_trace());
    vec![
        (QForm::hyperbolic(1), Subspace::span(2, &[unit(2, 0)]).expect("ambient 2")),
        (split_k, split_l),
        (double.form.clone(), crate::qlie::diagonal(3)),
    ]
}

fn vec_sum(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Random lagrangian in `(TN + T*N) + k`, moved by a random orthogonal map from `TN + l`.
fn random_lag_over<R: rand::Rng>(n: usize, qk: &QForm, lk: &Subspace, rng: &mut R) -> Subspace {
    let nk = qk.dim();
    let zeros_k = vec![Q::zero(); nk];
    let mut start: Vec<Vec<Q>> = (0..n).map(|i| vcat(&[&unit(2 * n, i), &zeros_k])).collect();
    start.extend(lk.basis().iter().map(|v| vcat(&[&vec![Q::zero(); 2 * n], v])));
    let form = QForm::hyperbolic(n).direct_sum(qk);
    random_lagrangian(&form, &Subspace::span(2 * n + nk, &start).expect("ambient"), rng)
}

/// Random fibred pair over one of the [`fibre_bases`], redrawn until the images in `k` generate `k`.
/// Some small configurations never generate, so the sizes are redrawn as well.
pub fn random_fibered_pair<R: rand::Rng>(rng: &mut R) -> FiberedDiracPair {
    let bases = fibre_bases();
    loop {
        let (qk, lk) = &bases[rng.gen_range(0..bases.len())];
        let (n1, n2) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let l1 = random_lag_over(n1, qk, lk, rng);
        let l2 = random_lag_over(n2, &qk.neg(), lk, rng);
        let p = FiberedDiracPair { q1: QForm::hyperbolic(n1), q2: QForm::hyperbolic(n2), qk: qk.clone(), l1, l2 };
        if reduce(&p).map(|r| r.generated).unwrap_or(false) {
            return p;
        }
    }
}

/// Reduces `count` random fibred pairs; the first pair whose reduction is not a lagrangian of
/// half the dimension of `E1 x E2` with injective projection is described.
pub fn reduction_round_trips<R: rand::Rng>(count: usize, rng: &mut R) -> Result<Option<String>, RelError> {
    for i in 0..count {
        let p = random_fibered_pair(rng);
        let r = reduce(&p)?;
        let half = (p.q1.dim() + p.q2.dim()) / 2;
        if r.l.dim() != half || !r.injective || !r.lagrangian {
            return Ok(Some(format!("pair {i}: rank {} (expected {half}), injective {}, lagrangian {}", r.l.dim(), r.injective, r.lagrangian)));
        }
    }
    Ok(None)
}
