//! Shifted-symplectic fibre checks.
//!
//! Lagrangian conditions for 0-, 1- and 2-shifted isotropic morphisms are
//! decided at a fibre by exact ranks of the corresponding mapping-cone
//! sequences. Infinitesimal isotropic structures over polynomial Lie
//! algebroids are checked symbolically.

use crate::courant::{CourantAlgebroid, CourantError, Domain, DiracFrame, ProductCourant};
use crate::exactla::{q, qf, unit, LagClass, QForm, QMat, Subspace, Q};
use crate::polycal::{pair_form_vf, vec_add, vec_eval, vf_apply, OneForm, Poly, PolyError, PolyForm, VectorField};
use crate::qlie::QuadLieAlgebra;
use num::Zero;
use rand::Rng;
use thiserror::Error;

pub use crate::courant::{
    dynamical_frame, dynamical_r_check, qpoisson_conditions, qpoisson_decode, qpoisson_decode_at, qpoisson_encode,
    DynamicalReport, QPoissonData,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShiftedError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("(a, lambda, phi) is not injective at {point:?}")]
    NotInjective { point: Vec<String> },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Courant(#[from] CourantError),
}

/// Exactness data of `0 -> V_0 -> V_1 -> ... -> V_k -> 0`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SequenceReport {
    /// Consecutive maps compose to zero.
    pub is_complex: bool,
    /// `dim ker d_i - rank d_{i-1}` at each `V_i`.
    pub defects: Vec<usize>,
}

impl SequenceReport {
    pub fn exact(&self) -> bool {
        self.is_complex && self.defects.iter().all(|&d| d == 0)
    }

    /// Index of the first space where exactness fails.
    pub fn first_defect(&self) -> Option<usize> {
        self.defects.iter().position(|&d| d != 0)
    }
}

/// Exactness of a sequence given by its maps `d_i: V_i -> V_{i+1}`.
pub fn sequence_report(maps: &[QMat]) -> Result<SequenceReport, ShiftedError> {
    for w in maps.windows(2) {
        if w[1].cols != w[0].rows {
            return Err(ShiftedError::Shape(format!("map into dimension {} followed by map from {}", w[0].rows, w[1].cols)));
        }
    }
    let is_complex = maps.windows(2).all(|w| w[1].mul(&w[0]).is_zero());
    let ranks: Vec<usize> = maps.iter().map(QMat::rank).collect();
    let mut defects = Vec::new();
    for i in 0..=maps.len() {
        let dim = if i < maps.len() { maps[i].cols } else { maps[i - 1].rows };
        let rank_out = if i < maps.len() { ranks[i] } else { 0 };
        let rank_in = if i > 0 { ranks[i - 1] } else { 0 };
        defects.push((dim - rank_out).saturating_sub(rank_in));
    }
    Ok(SequenceReport { is_complex, defects })
}

/// `<u, v> = -Omega((u, 0), (a v, v)) + Omega((a u, u), (v, 0))` at units, with anchor `a = 0` for groups.
///
/// `omega(x1, x2, y1, y2)` evaluates `Omega((x1, x2), (y1, y2))` on composable tangent pairs at `(1, 1)`.
pub fn pairing_from_omega2(dim: usize, omega: impl Fn(&[Q], &[Q], &[Q], &[Q]) -> Q) -> QForm {
    let z = vec![Q::zero(); dim];
    let mut g = QMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let (u, v) = (unit(dim, i), unit(dim, j));
            g[(i, j)] = -omega(&u, &z, &z, &v) + omega(&z, &u, &v, &z);
        }
    }
    QForm::new(g).expect("pairing from a 2-form is symmetric")
}

/// Floating-point version of [`pairing_from_omega2`].
pub fn pairing_from_omega2_f64(dim: usize, omega: impl Fn(&[f64], &[f64], &[f64], &[f64]) -> f64) -> nalgebra::DMatrix<f64> {
    let z = vec![0.0; dim];
    nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
        let mut u = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        u[i] = 1.0;
        v[j] = 1.0;
        -omega(&u, &z, &z, &v) + omega(&z, &u, &v, &z)
    })
}

/// `Omega((X1, X2), (Y1, Y2)) = -1/2 (<X1, Y2> - <Y1, X2>)` at the unit `(1, 1)` of `K x K`.
pub fn polwie_omega_at_units(k: &QuadLieAlgebra) -> impl Fn(&[Q], &[Q], &[Q], &[Q]) -> Q + '_ {
    move |x1, x2, y1, y2| -(k.pair(x1, y2) - k.pair(y1, x2)) * qf(1, 2)
}

/// Fibre data of a 0-shifted isotropic morphism into a foliation groupoid with basic 2-form `varpi`.
#[derive(Clone, Debug)]
pub struct ZeroShiftedFiber {
    pub a_h: QMat,
    pub lie_phi: QMat,
    pub t_phi: QMat,
    pub a_g: QMat,
    pub varpi: QMat,
}

impl ZeroShiftedFiber {
    /// `0 -> A_H -> TN + A_G -> TM -> T*N -> A_H* -> 0`.
    pub fn sequence(&self) -> Result<SequenceReport, ShiftedError> {
        let d1 = self.a_h.vcat(&self.lie_phi);
        let d2 = self.t_phi.hcat(&self.a_g.neg());
        let d3 = self.t_phi.transpose().mul(&self.varpi);
        let d4 = self.a_h.transpose().neg();
        sequence_report(&[d1, d2, d3, d4])
    }

    /// Injective anchor, injective `TN/a_H -> TM/a_G` and half rank.
    pub fn criterion(&self) -> bool {
        let n = self.t_phi.cols;
        let m = self.t_phi.rows;
        let img_h = Subspace::image_of(&self.a_h);
        let img_g = Subspace::image_of(&self.a_g);
        let quotient_h = n - img_h.dim();
        let quotient_g = m - img_g.dim();
        let induced_injective = img_g.preimage(&self.t_phi) == img_h;
        let isotropic = self.t_phi.transpose().mul(&self.varpi).mul(&self.t_phi).is_zero();
        isotropic && self.a_h.rank() == self.a_h.cols && induced_injective && 2 * quotient_h == quotient_g
    }
}

/// Fibre data of a 1-shifted isotropic morphism into a quasi-symplectic groupoid.
#[derive(Clone, Debug)]
pub struct OneShiftedFiber {
    pub a_h: QMat,
    pub lie_phi: QMat,
    pub t_phi: QMat,
    pub sigma: QMat,
    pub a_g: QMat,
    pub lambda_omega: QMat,
}

impl OneShiftedFiber {
    /// `0 -> A_H -> TN + A_G -> TM + T*N -> A_H* -> 0`.
    pub fn sequence(&self) -> Result<SequenceReport, ShiftedError> {
        let d1 = self.a_h.vcat(&self.lie_phi);
        let top = self.t_phi.hcat(&self.a_g.neg());
        let bottom = self.sigma.hcat(&self.t_phi.transpose().mul(&self.lambda_omega));
        let d2 = top.vcat(&bottom);
        let d3 = self.lie_phi.transpose().mul(&self.lambda_omega.transpose()).neg().hcat(&self.a_h.transpose());
        sequence_report(&[d1, d2, d3])
    }

    /// `A_H -> TN x L` is an isomorphism onto `R_{phi, sigma} n (TN x L)`.
    pub fn dirac_criterion(&self) -> bool {
        // Pairs (Y, u) with T phi Y = a_G u and sigma Y = -T phi^T lambda u.
        let top = self.t_phi.hcat(&self.a_g.neg());
        let bottom = self.sigma.hcat(&self.t_phi.transpose().mul(&self.lambda_omega));
        let target = Subspace::kernel_of(&top.vcat(&bottom));
        let j = self.a_h.vcat(&self.lie_phi);
        j.rank() == j.cols && Subspace::image_of(&j) == target && self.a_g.vcat(&self.lambda_omega).rank() == self.a_g.cols
    }
}

/// `ker(a) n ker(lambda) = 0` and `rank A = dim M`, for the fibre of a closed 1-shifted 2-form.
pub fn one_shifted_nondegenerate(a: &QMat, lambda: &QMat) -> bool {
    a.vcat(lambda).rank() == a.cols && a.cols == a.rows
}

/// The same condition as exactness of `0 -> A -> TM + T*M -> A* -> 0`.
pub fn one_shifted_cone_exact(a: &QMat, lambda: &QMat) -> Result<bool, ShiftedError> {
    let d1 = a.vcat(lambda);
    let d2 = lambda.transpose().neg().hcat(&a.transpose().neg());
    Ok(sequence_report(&[d1, d2])?.exact())
}

/// Fibre at a unit of infinitesimal 2-shifted data `(a, lambda, phi)` into a quadratic `k`.
#[derive(Clone, Debug)]
pub struct TwoShiftedFiber {
    pub a: QMat,
    pub lambda: QMat,
    pub phi: QMat,
    pub k_form: QForm,
}

/// Verdicts of the three characterizations of lagrangian 2-shifted structures.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PropLagVerdict {
    pub exact_sequence: bool,
    pub dirac_image: bool,
    pub kernel_and_dimension: bool,
}

impl PropLagVerdict {
    pub fn agree(&self) -> bool {
        self.exact_sequence == self.dirac_image && self.dirac_image == self.kernel_and_dimension
    }
}

impl TwoShiftedFiber {
    pub fn rank(&self) -> usize {
        self.a.cols
    }

    pub fn base_dim(&self) -> usize {
        self.a.rows
    }

    fn j(&self) -> QMat {
        self.a.vcat(&self.lambda).vcat(&self.phi)
    }

    fn ambient_form(&self) -> QForm {
        QForm::hyperbolic(self.base_dim()).direct_sum(&self.k_form)
    }

    /// `i_{a u} lambda(v) + i_{a v} lambda(u) + <phi u, phi v> = 0`.
    pub fn isotropic(&self) -> bool {
        self.a.transpose().mul(&self.lambda).add(&self.lambda.transpose().mul(&self.a)).add(&self.phi.transpose().mul(self.k_form.gram()).mul(&self.phi)).is_zero()
    }

    /// `0 -> A -> (TN + T*N) + k -> A* -> 0` with maps `(a, lambda, phi)` and `-lambda* - a* - phi* o <,>`.
    pub fn sequence(&self) -> Result<SequenceReport, ShiftedError> {
        let d2 = self
            .lambda
            .transpose()
            .neg()
            .hcat(&self.a.transpose().neg())
            .hcat(&self.phi.transpose().mul(self.k_form.gram()).neg());
        sequence_report(&[self.j(), d2])
    }

    /// `(a, lambda, phi)` injective with lagrangian image.
    pub fn dirac_image(&self) -> bool {
        let j = self.j();
        j.rank() == j.cols && self.ambient_form().lagrangian_class(&Subspace::image_of(&j)) == Ok(LagClass::Lagrangian)
    }

    /// `sigma` at a unit on `T_x H = TN + A`.
    pub fn sigma_at_unit(&self) -> QMat {
        let (n, r) = (self.base_dim(), self.rank());
        let aa = self.lambda.transpose().mul(&self.a).add(&self.phi.transpose().mul(self.k_form.gram()).mul(&self.phi).scale(&qf(1, 2)));
        let mut s = QMat::zeros(n + r, n + r);
        for i in 0..n {
            for b in 0..r {
                s[(i, n + b)] = -self.lambda[(i, b)].clone();
                s[(n + b, i)] = self.lambda[(i, b)].clone();
            }
        }
        for b in 0..r {
            for c in 0..r {
                s[(n + b, n + c)] = aa[(b, c)].clone();
            }
        }
        s
    }

    /// Unit-fibre kernel data: `sigma`, `T Phi`, `T s`, `T t` on `TN + A`.
    pub fn unit_kernel_data(&self) -> UnitKernelData {
        let (n, r) = (self.base_dim(), self.rank());
        let t_phi = QMat::zeros(self.phi.rows, n).hcat(&self.phi);
        let t_s = QMat::identity(n).hcat(&QMat::zeros(n, r));
        let t_t = QMat::identity(n).hcat(&self.a);
        UnitKernelData {
            dim_h: n + r,
            dim_n: n,
            dim_k: self.k_form.dim(),
            sigma: self.sigma_at_unit(),
            t_phi,
            t_s,
            t_t,
        }
    }

    pub fn verdict(&self) -> Result<PropLagVerdict, ShiftedError> {
        Ok(PropLagVerdict {
            exact_sequence: self.sequence()?.exact(),
            dirac_image: self.dirac_image(),
            kernel_and_dimension: prop_lag_c_check(&self.unit_kernel_data()).holds,
        })
    }
}

/// Dimensions and unit-fibre tangent maps of a morphism `Phi: H -> K`.
#[derive(Clone, Debug)]
pub struct UnitKernelData {
    pub dim_h: usize,
    pub dim_n: usize,
    pub dim_k: usize,
    pub sigma: QMat,
    pub t_phi: QMat,
    pub t_s: QMat,
    pub t_t: QMat,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KernelCheck {
    pub dimension: bool,
    pub kernel_trivial: bool,
    pub holds: bool,
    pub witness: Option<Vec<String>>,
}

/// `dim H - 2 dim N = 1/2 dim K` and `ker sigma n ker T Phi n ker T s n ker T t = 0`.
pub fn prop_lag_c_check(d: &UnitKernelData) -> KernelCheck {
    let dimension = 2 * (d.dim_h as i64 - 2 * d.dim_n as i64) == d.dim_k as i64;
    let stacked = d.sigma.vcat(&d.t_phi).vcat(&d.t_s).vcat(&d.t_t);
    let ker = stacked.kernel();
    let kernel_trivial = ker.is_empty();
    let witness = ker.first().map(|v| v.iter().map(|x| x.to_string()).collect());
    KernelCheck { dimension, kernel_trivial, holds: dimension && kernel_trivial, witness }
}

/// A lagrangian of `hyperbolic(n) + form` containing `TN`, given a lagrangian `lk` of `form`.
pub fn standard_start(n: usize, form: &QForm, lk: &Subspace) -> Subspace {
    let amb = 2 * n + form.dim();
    let mut vecs: Vec<Vec<Q>> = (0..n).map(|i| unit(amb, i)).collect();
    for v in lk.basis() {
        let mut w = vec![Q::zero(); 2 * n];
        w.extend(v.iter().cloned());
        vecs.push(w);
    }
    Subspace::span(amb, &vecs).expect("ambient")
}

/// Random lagrangian 2-shifted fibre: a random lagrangian with a random basis.
pub fn random_lagrangian_fiber<R: Rng>(n: usize, form: &QForm, lk: &Subspace, rng: &mut R) -> TwoShiftedFiber {
    let amb_form = QForm::hyperbolic(n).direct_sum(form);
    let l = crate::relations::random_lagrangian(&amb_form, &standard_start(n, form, lk), rng);
    let b = l.basis_matrix();
    let r = b.cols;
    let change = loop {
        let m = QMat::from_rows(r, &(0..r).map(|_| (0..r).map(|_| crate::polycal::random_q(rng)).collect()).collect::<Vec<_>>());
        if m.rank() == r {
            break m;
        }
    };
    let j = b.mul(&change);
    split_fiber(&j, n, form)
}

fn split_fiber(j: &QMat, n: usize, form: &QForm) -> TwoShiftedFiber {
    let rows = |lo: usize, hi: usize| QMat::from_rows(j.cols, &(lo..hi).map(|i| j.row(i).to_vec()).collect::<Vec<_>>());
    TwoShiftedFiber { a: rows(0, n), lambda: rows(n, 2 * n), phi: rows(2 * n, 2 * n + form.dim()), k_form: form.clone() }
}

/// Isotropic but non-lagrangian perturbations of a lagrangian fibre, selected by `kind`.
pub fn perturb_fiber<R: Rng>(f: &TwoShiftedFiber, kind: usize, rng: &mut R) -> TwoShiftedFiber {
    let j = f.j();
    let n = f.base_dim();
    let r = j.cols;
    let j2 = match kind % 3 {
        // A kernel vector: compose with a rank-deficient change of basis.
        0 => {
            let mut m = QMat::identity(r);
            let c = rng.gen_range(0..r);
            let other = (c + 1) % r;
            for i in 0..r {
                m[(i, c)] = m[(i, other)].clone() * crate::polycal::random_q(rng);
            }
            j.mul(&m)
        }
        // An extra zero generator.
        1 => j.hcat(&QMat::zeros(j.rows, 1)),
        // A dropped generator.
        _ => {
            let c = rng.gen_range(0..r);
            QMat::from_cols(j.rows, &(0..r).filter(|&i| i != c).map(|i| j.col(i)).collect::<Vec<_>>())
        }
    };
    split_fiber(&j2, n, &f.k_form)
}

/// Runs the three characterizations on `count` random fibres, alternating lagrangian fibres over
/// `sl2 + sl2bar` and `su2 + su2bar` with isotropic non-lagrangian perturbations of them.
/// Describes the first fibre where they disagree or give the wrong verdict.
pub fn prop_lag_agreement<R: Rng>(count: usize, rng: &mut R) -> Result<Option<String>, ShiftedError> {
    let doubles = [crate::qlie::k_plus_kbar(&crate::qlie::sl2_trace()), crate::qlie::k_plus_kbar(&crate::qlie::su2_trace())];
    for t in 0..count {
        let k = &doubles[(t / 2) % 2];
        let lk = crate::qlie::diagonal(k.dim() / 2);
        let f = random_lagrangian_fiber(1 + t % 3, &k.form, &lk, rng);
        let (fibre, expected) = if t % 2 == 0 { (f, true) } else { (perturb_fiber(&f, t / 2, rng), false) };
        let v = fibre.verdict()?;
        if !v.agree() || v.exact_sequence != expected {
            return Ok(Some(format!("fibre {t}: {v:?}, expected all {expected}")));
        }
    }
    Ok(None)
}

/// Lie algebroid over a polynomial chart, presented by a frame.
#[derive(Clone, Debug)]
pub struct PolyAlgebroid {
    pub n: usize,
    /// `a(e_b)`.
    pub anchors: Vec<VectorField>,
    /// `structure[b][c][d]`, with `[e_b, e_c] = sum_d structure[b][c][d] e_d`.
    pub structure: Vec<Vec<Vec<Poly>>>,
}

impl PolyAlgebroid {
    pub fn rank(&self) -> usize {
        self.anchors.len()
    }

    /// `TM` with the coordinate frame.
    pub fn tangent(n: usize) -> Self {
        let anchors = (0..n).map(|i| crate::polycal::const_vec(n, &unit(n, i))).collect();
        PolyAlgebroid { n, anchors, structure: vec![vec![vec![Poly::zero(n); n]; n]; n] }
    }

    /// `T*M` of a Poisson bivector, framed by `dx_i`.
    pub fn cotangent(pi: &crate::polycal::PolyMultivector) -> Self {
        let n = pi.chart_dim();
        let m = pi.bivector_matrix();
        let anchors = (0..n).map(|i| pi.sharp(&crate::polycal::const_vec(n, &unit(n, i)))).collect();
        let structure = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| m[i][j].deriv(k)).collect()).collect()).collect();
        PolyAlgebroid { n, anchors, structure }
    }

    /// Action algebroid `M x g` for an action by polynomial vector fields.
    pub fn action(g: &crate::qlie::LieAlgebra, anchors: Vec<VectorField>) -> Self {
        let n = anchors[0].len();
        let m = g.dim();
        let structure = (0..m).map(|b| (0..m).map(|c| (0..m).map(|d| Poly::constant(n, g.c(b, c, d).clone())).collect()).collect()).collect();
        PolyAlgebroid { n, anchors, structure }
    }

    /// `[e_b, e_c]` as frame coefficients.
    pub fn frame_bracket(&self, b: usize, c: usize) -> &[Poly] {
        &self.structure[b][c]
    }

    /// Vanishing of `a[e_b, e_c] - [a e_b, a e_c]`.
    pub fn anchor_is_hom(&self) -> bool {
        let r = self.rank();
        (0..r).all(|b| {
            (0..r).all(|c| {
                let lhs = self.structure[b][c].iter().zip(&self.anchors).fold(vec![Poly::zero(self.n); self.n], |acc, (f, a)| {
                    vec_add(&acc, &crate::polycal::vec_mul(f, a))
                });
                lhs == crate::polycal::vf_bracket(&self.anchors[b], &self.anchors[c])
            })
        })
    }
}

/// Residuals of the IM 2-form identities on frame elements.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ImReport {
    pub skew: bool,
    pub bracket: bool,
    pub eta_closed: bool,
    pub k_bracket: bool,
    pub witness: Option<String>,
}

impl ImReport {
    pub fn ok(&self) -> bool {
        self.skew && self.bracket && self.eta_closed && self.k_bracket
    }
}

fn combine_frame(coeffs: &[Poly], items: &[Vec<Poly>], n: usize, len: usize) -> Vec<Poly> {
    coeffs.iter().zip(items).fold(vec![Poly::zero(n); len], |acc, (f, v)| vec_add(&acc, &crate::polycal::vec_mul(f, v)))
}

/// `eta`-closed IM 2-form identities for `lambda(e_b)`.
pub fn im2form_check(alg: &PolyAlgebroid, lambda: &[OneForm], eta: &PolyForm) -> Result<ImReport, ShiftedError> {
    inf2_isotropic_check(alg, lambda, eta, None)
}

/// Infinitesimal 2-shifted isotropic structure `(lambda, eta)` on `phi: A -> k`.
///
/// Checks `lambda [u,v] = L_{au} lambda v - i_{av} d lambda u + i_{av} i_{au} eta + <d phi u, phi v>`,
/// `-<phi u, phi v> = i_{au} lambda v + i_{av} lambda u`, `d eta = 0` and that `phi` is a morphism
/// `phi [u,v] = [phi u, phi v] + a(u) phi v - a(v) phi u`.
pub fn inf2_isotropic_check(
    alg: &PolyAlgebroid,
    lambda: &[OneForm],
    eta: &PolyForm,
    phi: Option<(&QuadLieAlgebra, &[Vec<Poly>])>,
) -> Result<ImReport, ShiftedError> {
    let n = alg.n;
    let r = alg.rank();
    if lambda.len() != r {
        return Err(ShiftedError::Shape(format!("{} lambda values for rank {r}", lambda.len())));
    }
    let eta_closed = eta.d()?.is_zero();
    let pair_k = |u: &[Poly], v: &[Poly]| -> Poly {
        match phi {
            None => Poly::zero(n),
            Some((k, _)) => {
                let g = k.form.gram();
                let mut s = Poly::zero(n);
                for i in 0..k.dim() {
                    for j in 0..k.dim() {
                        if !g[(i, j)].is_zero() {
                            s = s.add(&u[i].mul(&v[j]).scale(&g[(i, j)]));
                        }
                    }
                }
                s
            }
        }
    };
    let mut witness = None;
    let mut skew = true;
    let mut bracket = true;
    let mut k_bracket = true;
    let lam_forms: Vec<PolyForm> = lambda.iter().map(|l| PolyForm::one_form(l)).collect();
    for b in 0..r {
        for c in 0..r {
            let (ab, ac) = (&alg.anchors[b], &alg.anchors[c]);
            let (pb, pc) = match phi {
                Some((_, p)) => (p[b].clone(), p[c].clone()),
                None => (Vec::new(), Vec::new()),
            };
            if c >= b {
                let s = pair_form_vf(&lambda[c], ab).add(&pair_form_vf(&lambda[b], ac)).add(&pair_k(&pb, &pc));
                if !s.is_zero() && skew {
                    skew = false;
                    witness.get_or_insert(format!("isotropy residual on (e{b}, e{c}): {s:?}"));
                }
            }
            let lhs = combine_frame(alg.frame_bracket(b, c), lambda, n, n);
            let mut rhs = lam_forms[c].lie(ab)?.sub(&lam_forms[b].d()?.interior(ac));
            rhs = rhs.add(&eta.interior(ab).interior(ac));
            let mut rhs = rhs.one_form_comps();
            if phi.is_some() {
                let dpair: Vec<Poly> = (0..n)
                    .map(|i| pair_k(&pb.iter().map(|p| p.deriv(i)).collect::<Vec<_>>(), &pc))
                    .collect();
                rhs = vec_add(&rhs, &dpair);
            }
            let res = crate::polycal::vec_sub(&lhs, &rhs);
            if !crate::polycal::vec_is_zero(&res) && bracket {
                bracket = false;
                witness.get_or_insert(format!("bracket residual on (e{b}, e{c}): {res:?}"));
            }
            if let Some((k, p)) = phi {
                let lhs = combine_frame(alg.frame_bracket(b, c), p, n, k.dim());
                let lie = crate::polycal::vec_sub(
                    &pc.iter().map(|f| vf_apply(ab, f)).collect::<Vec<_>>(),
                    &pb.iter().map(|f| vf_apply(ac, f)).collect::<Vec<_>>(),
                );
                let rhs = vec_add(&crate::courant::poly_bracket(k, &pb, &pc), &lie);
                if lhs != rhs && k_bracket {
                    k_bracket = false;
                    witness.get_or_insert(format!("phi is not a morphism on (e{b}, e{c})"));
                }
            }
        }
    }
    Ok(ImReport { skew, bracket, eta_closed, k_bracket, witness })
}

/// Image frame of `(a, lambda, phi)` in `T_eta N x k`.
pub fn image_frame(alg: &PolyAlgebroid, lambda: &[OneForm], phi: &[Vec<Poly>]) -> DiracFrame {
    let sections = (0..alg.rank())
        .map(|b| crate::courant::vcat_poly(&[alg.anchors[b].clone(), lambda[b].clone(), phi[b].clone()]))
        .collect();
    DiracFrame { sections, domain: Domain::Everywhere }
}

/// `(a, lambda, phi)` is bracket preserving into `T_eta N x k` on frame elements.
pub fn bracket_preserving(alg: &PolyAlgebroid, lambda: &[OneForm], eta: &PolyForm, k: &QuadLieAlgebra, phi: &[Vec<Poly>]) -> Result<bool, ShiftedError> {
    let ca = ProductCourant::new(alg.n, Some(eta.clone()), Some(k.clone()))?;
    let frame = image_frame(alg, lambda, phi);
    let len = ca.rank();
    for b in 0..alg.rank() {
        for c in 0..alg.rank() {
            let lhs = ca.bracket(&frame.sections[b], &frame.sections[c])?;
            let rhs = combine_frame(alg.frame_bracket(b, c), &frame.sections, alg.n, len);
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The lagrangian image of a 2-shifted infinitesimal lagrangian structure.
///
/// Pointwise injectivity is checked at `points`; the returned frame spans a
/// Dirac structure of rank `dim N + 1/2 dim k`.
pub fn inf2_lagrangian_embed(
    alg: &PolyAlgebroid,
    lambda: &[OneForm],
    eta: &PolyForm,
    k: &QuadLieAlgebra,
    phi: &[Vec<Poly>],
    points: &[Vec<Q>],
) -> Result<(ProductCourant, DiracFrame), ShiftedError> {
    let frame = image_frame(alg, lambda, phi);
    let len = 2 * alg.n + k.dim();
    for x in points {
        let cols: Vec<Vec<Q>> = frame.sections.iter().map(|e| vec_eval(e, x)).collect();
        if QMat::from_cols(len, &cols).rank() < cols.len() {
            return Err(ShiftedError::NotInjective { point: x.iter().map(|c| c.to_string()).collect() });
        }
    }
    let ca = ProductCourant::new(alg.n, Some(eta.clone()), Some(k.clone()))?;
    Ok((ca, frame))
}

/// Rank of `R_{phi, sigma} n (TN x L)` at a point; constancy over samples is the 1-shifted lagrangian certificate.
pub fn one_shifted_intersection_rank(dphi: &QMat, sigma: &QMat, l: &Subspace) -> usize {
    let r = crate::relations::r_phi_sigma(dphi, sigma);
    let (m, n) = (dphi.rows, dphi.cols);
    let amb = 2 * n + 2 * m;
    let mut vecs: Vec<Vec<Q>> = (0..n).map(|i| unit(amb, i)).collect();
    for v in l.basis() {
        let mut w = vec![Q::zero(); 2 * n];
        w.extend(v.iter().cloned());
        vecs.push(w);
    }
    r.meet(&Subspace::span(amb, &vecs).expect("ambient")).dim()
}

/// A lagrangian fibre of a 0-shifted morphism: a transversal lagrangian in a foliated symplectic model.
pub fn random_zero_shifted<R: Rng>(s: usize, f: usize, fh: usize, rng: &mut R) -> ZeroShiftedFiber {
    let m = 2 * s + f;
    let n = s + fh;
    let mut varpi = QMat::zeros(m, m);
    for i in 0..s {
        varpi[(i, s + i)] = q(1);
        varpi[(s + i, i)] = q(-1);
    }
    let start = Subspace::span(2 * s, &(0..s).map(|i| unit(2 * s, i)).collect::<Vec<_>>()).expect("ambient");
    let lag = random_symplectic_lagrangian(s, &start, rng);
    let mut t_phi = QMat::zeros(m, n);
    for (c, v) in lag.basis().iter().enumerate() {
        for i in 0..2 * s {
            t_phi[(i, c)] = v[i].clone();
        }
        for i in 0..f {
            t_phi[(2 * s + i, c)] = crate::polycal::random_q(rng);
        }
    }
    let mut bmap = QMat::zeros(f, fh);
    for i in 0..f {
        for j in 0..fh {
            bmap[(i, j)] = crate::polycal::random_q(rng);
            t_phi[(2 * s + i, s + j)] = bmap[(i, j)].clone();
        }
    }
    let mut a_h = QMat::zeros(n, fh);
    for j in 0..fh {
        a_h[(s + j, j)] = q(1);
    }
    let mut a_g = QMat::zeros(m, f);
    for i in 0..f {
        a_g[(2 * s + i, i)] = q(1);
    }
    ZeroShiftedFiber { a_h, lie_phi: bmap, t_phi, a_g, varpi }
}

/// Random lagrangian for the standard symplectic form on `R^{2s}` via a Cayley transform.
fn random_symplectic_lagrangian<R: Rng>(s: usize, start: &Subspace, rng: &mut R) -> Subspace {
    let d = 2 * s;
    let mut j = QMat::zeros(d, d);
    for i in 0..s {
        j[(i, s + i)] = q(1);
        j[(s + i, i)] = q(-1);
    }
    loop {
        // A = J^-1 S with S symmetric lies in sp(2s).
        let mut sm = QMat::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v = crate::polycal::random_q(rng);
                sm[(a, b)] = v.clone();
                sm[(b, a)] = v;
            }
        }
        let a = j.inverse().expect("symplectic").mul(&sm);
        let id = QMat::identity(d);
        if let Ok(inv) = id.add(&a).inverse() {
            return start.image(&id.sub(&a).mul(&inv));
        }
    }
}

/// Lagrangian 1-shifted fibre built from a random Dirac fibre `L`, `T phi` and `sigma`.
pub fn random_one_shifted<R: Rng>(n: usize, m: usize, rng: &mut R) -> OneShiftedFiber {
    let form = QForm::hyperbolic(m);
    let start = Subspace::span(2 * m, &(0..m).map(|i| unit(2 * m, i)).collect::<Vec<_>>()).expect("ambient");
    let l = crate::relations::random_lagrangian(&form, &start, rng);
    let lb = l.basis_matrix();
    let a_g = QMat::from_rows(m, &(0..m).map(|i| lb.row(i).to_vec()).collect::<Vec<_>>());
    let lambda_omega = QMat::from_rows(m, &(m..2 * m).map(|i| lb.row(i).to_vec()).collect::<Vec<_>>());
    let t_phi = QMat::from_rows(n, &(0..m).map(|_| (0..n).map(|_| crate::polycal::random_q(rng)).collect()).collect::<Vec<_>>());
    let mut sigma = QMat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = crate::polycal::random_q(rng);
            sigma[(j, i)] = -v.clone();
            sigma[(i, j)] = v;
        }
    }
    let top = t_phi.hcat(&a_g.neg());
    let bottom = sigma.hcat(&t_phi.transpose().mul(&lambda_omega));
    let ker = top.vcat(&bottom).kernel();
    let k = QMat::from_cols(n + m, &ker);
    let a_h = QMat::from_rows(k.cols, &(0..n).map(|i| k.row(i).to_vec()).collect::<Vec<_>>());
    let lie_phi = QMat::from_rows(k.cols, &(n..n + m).map(|i| k.row(i).to_vec()).collect::<Vec<_>>());
    OneShiftedFiber { a_h, lie_phi, t_phi, sigma, a_g, lambda_omega }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycal::PolyMultivector;
    use crate::qlie::{k_plus_kbar, sl2_trace, su2_trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_lagrangian(k: &QuadLieAlgebra) -> Subspace {
        let d = k.dim() / 2;
        Subspace::span(2 * d, &(0..d).map(|i| crate::exactla::vadd(&unit(2 * d, i), &unit(2 * d, d + i))).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn polwie_pairing_recovers_gram() {
        for k in [sl2_trace(), su2_trace()] {
            let f = pairing_from_omega2(k.dim(), polwie_omega_at_units(&k));
            assert_eq!(f.gram(), k.form.gram());
        }
        let zero = pairing_from_omega2(3, |_, _, _, _| Q::zero());
        assert!(zero.gram().is_zero());
    }

    #[test]
    fn two_shifted_characterizations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = k_plus_kbar(&sl2_trace());
        let lk = diag_lagrangian(&k);
        for t in 0..12 {
            let f = random_lagrangian_fiber(1 + t % 3, &k.form, &lk, &mut rng);
            assert!(f.isotropic());
            let v = f.verdict().unwrap();
            assert!(v.exact_sequence && v.dirac_image && v.kernel_and_dimension, "{v:?}");
            let p = perturb_fiber(&f, t, &mut rng);
            assert!(p.isotropic());
            let v = p.verdict().unwrap();
            assert!(v.agree() && !v.exact_sequence, "{v:?}");
        }
        assert_eq!(prop_lag_agreement(8, &mut rng).unwrap(), None);
    }

    #[test]
    fn point_target_is_one_shifted_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let form = QForm::new(QMat::zeros(0, 0)).unwrap();
        let f = random_lagrangian_fiber(3, &form, &Subspace::zero(0), &mut rng);
        assert!(f.sequence().unwrap().exact());
        assert!(one_shifted_nondegenerate(&f.a, &f.lambda));
        assert!(one_shifted_cone_exact(&f.a, &f.lambda).unwrap());
        let bad = a_without_column(&f);
        assert!(!one_shifted_nondegenerate(&bad.a, &bad.lambda));
        assert!(!one_shifted_cone_exact(&bad.a, &bad.lambda).unwrap());
    }

    fn a_without_column(f: &TwoShiftedFiber) -> TwoShiftedFiber {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        perturb_fiber(f, 0, &mut rng)
    }

    #[test]
    fn kernel_vector_has_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let k = k_plus_kbar(&sl2_trace());
        let f = random_lagrangian_fiber(2, &k.form, &diag_lagrangian(&k), &mut rng);
        let p = perturb_fiber(&f, 0, &mut rng);
        let c = prop_lag_c_check(&p.unit_kernel_data());
        assert!(c.dimension && !c.kernel_trivial && c.witness.is_some());
    }

    #[test]
    fn zero_shifted_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for (s, f, fh) in [(1, 1, 1), (2, 1, 2), (2, 2, 0)] {
            let z = random_zero_shifted(s, f, fh, &mut rng);
            assert!(z.criterion());
            assert!(z.sequence().unwrap().exact());
            // A non-injective anchor breaks exactness at the first position.
            let mut bad = z.clone();
            bad.a_h = bad.a_h.hcat(&QMat::zeros(bad.a_h.rows, 1));
            bad.lie_phi = bad.lie_phi.hcat(&QMat::zeros(bad.lie_phi.rows, 1));
            let rep = bad.sequence().unwrap();
            assert_eq!(rep.first_defect(), Some(0));
            assert!(!bad.criterion());
        }
    }

    #[test]
    fn one_shifted_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for (n, m) in [(1, 2), (2, 2), (3, 2), (2, 3)] {
            let f = random_one_shifted(n, m, &mut rng);
            assert!(f.dirac_criterion());
            assert!(f.sequence().unwrap().exact());
            let mut bad = f.clone();
            bad.a_h = bad.a_h.hcat(&QMat::zeros(n, 1));
            bad.lie_phi = bad.lie_phi.hcat(&QMat::zeros(m, 1));
            assert!(!bad.dirac_criterion() && !bad.sequence().unwrap().exact());
        }
    }

    fn lie_poisson_sl2() -> PolyMultivector {
        crate::courant::lie_poisson(&sl2_trace().lie)
    }

    #[test]
    fn im2_forms() {
        // T*M of a linear Poisson structure with lambda = id.
        let pi = lie_poisson_sl2();
        let alg = PolyAlgebroid::cotangent(&pi);
        assert!(alg.anchor_is_hom());
        let lambda: Vec<OneForm> = (0..3).map(|i| crate::polycal::const_vec(3, &unit(3, i))).collect();
        let zero3 = PolyForm::zero(3, 3).unwrap();
        assert!(im2form_check(&alg, &lambda, &zero3).unwrap().ok());
        let zero_l: Vec<OneForm> = vec![vec![Poly::zero(3); 3]; 3];
        assert!(im2form_check(&alg, &zero_l, &zero3).unwrap().ok());
        // TM with lambda = -i_. sigma needs eta = d sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let sigma = PolyForm::random(3, 2, 2, &mut rng).unwrap();
        let tm = PolyAlgebroid::tangent(3);
        let lam: Vec<OneForm> = (0..3).map(|i| sigma.interior(&crate::polycal::const_vec(3, &unit(3, i))).neg().one_form_comps()).collect();
        let eta = sigma.d().unwrap();
        let rep = im2form_check(&tm, &lam, &eta).unwrap();
        let rep_neg = im2form_check(&tm, &lam, &eta.neg()).unwrap();
        assert!(rep.ok() && !rep_neg.ok());
        let rep0 = im2form_check(&tm, &lam, &zero3).unwrap();
        assert!(rep0.skew && !rep0.bracket);
    }

    #[test]
    fn subalgebra_is_lagrangian_morphism() {
        // The diagonal of sl2 + sl2bar over a point of a 1-dim chart, with trivial action.
        let k = k_plus_kbar(&sl2_trace());
        let g = sl2_trace().lie;
        let n = 1;
        let alg = PolyAlgebroid::action(&g, vec![vec![Poly::zero(n)]; 3]);
        let lambda: Vec<OneForm> = vec![vec![Poly::zero(n)]; 3];
        let phi: Vec<Vec<Poly>> = (0..3).map(|i| crate::polycal::const_vec(n, &crate::exactla::vadd(&unit(6, i), &unit(6, 3 + i)))).collect();
        let eta = PolyForm::zero(n, 3).unwrap();
        let rep = inf2_isotropic_check(&alg, &lambda, &eta, Some((&k, &phi))).unwrap();
        assert!(rep.ok(), "{rep:?}");
        assert!(bracket_preserving(&alg, &lambda, &eta, &k, &phi).unwrap());
        // Embedding also needs the base directions; with a 0-dim image of TN it is not lagrangian.
        let (ca, frame) = inf2_lagrangian_embed(&alg, &lambda, &eta, &k, &phi, &[vec![q(1)]]).unwrap();
        let v = crate::courant::verify_dirac(&ca, &frame, crate::courant::VerifyMode::Exact).unwrap();
        assert!(v.isotropic && v.involutive && !v.lagrangian_rank);
        // Anti-diagonal images are not isotropic.
        let bad: Vec<Vec<Poly>> = (0..3).map(|i| crate::polycal::const_vec(n, &unit(6, i))).collect();
        let rep = inf2_isotropic_check(&alg, &lambda, &eta, Some((&k, &bad))).unwrap();
        assert!(!rep.skew);
    }

    #[test]
    fn one_shifted_intersection_rank_is_reported() {
        let dphi = QMat::from_i64(2, 1, &[1, 0]);
        let sigma = QMat::zeros(1, 1);
        let l = Subspace::span(4, &[unit(4, 0), unit(4, 1)]).unwrap();
        assert_eq!(one_shifted_intersection_rank(&dphi, &sigma, &l), 1);
    }
}
