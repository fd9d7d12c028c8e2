//! Quadratic Lie algebras, Manin pairs and Lie quasi-bialgebras.
//!
//! Lie algebras are given by exact structure constants `[e_i, e_j] = c_ij^k e_k`.
//! Lie algebras of matrix groups use the bracket `[x, y] = yx - xy`, for which
//! `u -> u^r` (the vector field `g -> ug`) is a Lie algebra homomorphism.
//!
//! A Lie quasi-bialgebra `(g, F, chi)` stores `F[i][j][k] = F(e_i)(e^j, e^k)` and
//! `chi[i][j][k] = chi(e^i, e^j, e^k)`. Its double `d = g + g*` carries the
//! canonical pairing `<u + a, v + b> = a(v) + b(u)` and the bracket
//!
//! `[u+a, v+b] = [u,v] + F(u)(b, .) - F(v)(a, .) + chi(a, b, .) + F*(a,b) + ad*_u b - ad*_v a`
//!
//! with `ad*_u b = -b o ad_u`. These are the signs for which the pairing is
//! ad-invariant, so that `F(e)(a, b) = <[a, b], e>` and `chi(a, b, c) = <[a, b], c>`
//! hold inside the double.

use crate::exactla::{dot, q, qf, unit, vadd, vscale, vsub, LagClass, LinAlgError, QForm, QMat, Subspace, Q};
use num::{One, Zero};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QlieError {
    #[error("bracket not antisymmetric on basis pair ({0}, {1})")]
    NotAntisymmetric(usize, usize),
    #[error("Jacobi identity fails on basis triple ({0}, {1}, {2})")]
    Jacobi(usize, usize, usize),
    #[error("subspace is not closed under the bracket (basis pair {0}, {1})")]
    NotSubalgebra(usize, usize),
    #[error("subspace is {0:?}, expected lagrangian")]
    NotLagrangian(LagClass),
    #[error("subspaces are not complementary (intersection dimension {0})")]
    NotComplement(usize),
    #[error("form is not ad-invariant on basis triple ({0}, {1}, {2})")]
    NotInvariant(usize, usize, usize),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

/// Finite-dimensional Lie algebra given by structure constants.
#[derive(Clone, PartialEq, Debug)]
pub struct LieAlgebra {
    dim: usize,
    c: Vec<Q>,
}

impl LieAlgebra {
    /// Structure constants with `c[(i*dim + j)*dim + k] = c_ij^k`; validity is not checked here.
    pub fn from_structure_constants(dim: usize, c: Vec<Q>) -> Self {
        assert_eq!(c.len(), dim * dim * dim, "structure constant count");
        LieAlgebra { dim, c }
    }

    /// Abelian Lie algebra.
    pub fn abelian(dim: usize) -> Self {
        LieAlgebra { dim, c: vec![Q::zero(); dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> &Q {
        &self.c[(i * self.dim + j) * self.dim + k]
    }

    fn c_mut(&mut self, i: usize, j: usize, k: usize) -> &mut Q {
        let d = self.dim;
        &mut self.c[(i * d + j) * d + k]
    }

    pub fn bracket(&self, u: &[Q], v: &[Q]) -> Vec<Q> {
        let n = self.dim;
        let mut r = vec![Q::zero(); n];
        for i in 0..n {
            if u[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if v[j].is_zero() {
                    continue;
                }
                let s = &u[i] * &v[j];
                for (k, rk) in r.iter_mut().enumerate() {
                    let c = self.c(i, j, k);
                    if !c.is_zero() {
                        *rk += &s * c;
                    }
                }
            }
        }
        r
    }

    /// Matrix of `ad_u`.
    pub fn ad(&self, u: &[Q]) -> QMat {
        let cols: Vec<Vec<Q>> = (0..self.dim).map(|j| self.bracket(u, &unit(self.dim, j))).collect();
        QMat::from_cols(self.dim, &cols)
    }

    /// First basis pair violating antisymmetry, if any.
    pub fn antisymmetry_violation(&self) -> Option<(usize, usize)> {
        for i in 0..self.dim {
            for j in i..self.dim {
                for k in 0..self.dim {
                    if self.c(i, j, k) != &-self.c(j, i, k).clone() {
                        return Some((i, j));
                    }
                }
            }
        }
        None
    }

    /// First basis triple violating the Jacobi identity, if any.
    pub fn jacobi_violation(&self) -> Option<(usize, usize, usize)> {
        let n = self.dim;
        let e = |i| unit(n, i);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let a = self.bracket(&e(i), &self.bracket(&e(j), &e(k)));
                    let b = self.bracket(&e(j), &self.bracket(&e(k), &e(i)));
                    let c = self.bracket(&e(k), &self.bracket(&e(i), &e(j)));
                    if !crate::exactla::is_zero_vec(&vadd(&vadd(&a, &b), &c)) {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn validate(&self) -> Result<(), QlieError> {
        if let Some((i, j)) = self.antisymmetry_violation() {
            return Err(QlieError::NotAntisymmetric(i, j));
        }
        if let Some((i, j, k)) = self.jacobi_violation() {
            return Err(QlieError::Jacobi(i, j, k));
        }
        Ok(())
    }

    /// Closure of a subspace under the bracket.
    pub fn check_subalgebra(&self, s: &Subspace) -> Result<(), QlieError> {
        let b = s.basis();
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                if !s.contains(&self.bracket(&b[i], &b[j])) {
                    return Err(QlieError::NotSubalgebra(i, j));
                }
            }
        }
        Ok(())
    }

    /// Direct product of Lie algebras.
    pub fn product(&self, o: &LieAlgebra) -> LieAlgebra {
        let n = self.dim + o.dim;
        let mut r = LieAlgebra::abelian(n);
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    *r.c_mut(i, j, k) = self.c(i, j, k).clone();
                }
            }
        }
        for i in 0..o.dim {
            for j in 0..o.dim {
                for k in 0..o.dim {
                    *r.c_mut(self.dim + i, self.dim + j, self.dim + k) = o.c(i, j, k).clone();
                }
            }
        }
        r
    }

    /// Structure constants in a new basis given by the columns of `t`.
    pub fn change_basis(&self, t: &QMat) -> Result<LieAlgebra, QlieError> {
        let tinv = t.inverse()?;
        let n = self.dim;
        let cols = t.col_vecs();
        let mut r = LieAlgebra::abelian(n);
        for i in 0..n {
            for j in 0..n {
                let b = tinv.mul_vec(&self.bracket(&cols[i], &cols[j]));
                for (k, x) in b.into_iter().enumerate() {
                    *r.c_mut(i, j, k) = x;
                }
            }
        }
        Ok(r)
    }

    /// Whether the matrix `t` intertwines the brackets of `self` and `target`.
    pub fn is_hom_into(&self, target: &LieAlgebra, t: &QMat) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let (ei, ej) = (unit(n, i), unit(n, j));
                t.mul_vec(&self.bracket(&ei, &ej)) == target.bracket(&t.mul_vec(&ei), &t.mul_vec(&ej))
            })
        })
    }
}

/// Lie algebra spanned by rational matrices, with `[x, y] = yx - xy`.
#[derive(Clone, Debug)]
pub struct MatrixLieAlgebra {
    pub basis: Vec<QMat>,
    pub lie: LieAlgebra,
    coord_solver: QMat,
}

impl MatrixLieAlgebra {
    pub fn new(basis: Vec<QMat>) -> Result<Self, QlieError> {
        let n = basis.len();
        let size = basis[0].rows * basis[0].cols;
        let flat = QMat::from_cols(size, &basis.iter().map(|b| b.data.clone()).collect::<Vec<_>>());
        if flat.rank() != n {
            return Err(LinAlgError::Singular.into());
        }
        let mut m = MatrixLieAlgebra { basis, lie: LieAlgebra::abelian(n), coord_solver: flat };
        for i in 0..n {
            for j in 0..n {
                let br = m.basis[j].mul(&m.basis[i]).sub(&m.basis[i].mul(&m.basis[j]));
                let Some(c) = m.coords(&br) else { return Err(QlieError::NotSubalgebra(i, j)) };
                for (k, x) in c.into_iter().enumerate() {
                    *m.lie.c_mut(i, j, k) = x;
                }
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of a matrix in the basis, if it lies in the span.
    pub fn coords(&self, m: &QMat) -> Option<Vec<Q>> {
        self.coord_solver.solve(&m.data)
    }

    pub fn matrix(&self, u: &[Q]) -> QMat {
        let r = self.basis[0].rows;
        let c = self.basis[0].cols;
        u.iter().zip(&self.basis).fold(QMat::zeros(r, c), |acc, (x, b)| acc.add(&b.scale(x)))
    }

    /// Gram matrix of `scale * tr(xy)`.
    pub fn trace_gram(&self, scale: &Q) -> QMat {
        let n = self.dim();
        let mut g = QMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.basis[i].mul(&self.basis[j]).trace() * scale;
            }
        }
        g
    }
}

/// Lie algebra with a nondegenerate invariant symmetric form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadLieAlgebra {
    pub lie: LieAlgebra,
    pub form: QForm,
}

/// Outcome of [`verify_quadratic`]; every field is an exact verdict.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct QuadReport {
    pub antisymmetric: bool,
    pub jacobi: bool,
    pub symmetric: bool,
    pub nondegenerate: bool,
    pub ad_invariant: bool,
    pub signature: Option<crate::exactla::Signature>,
    pub witness: Option<String>,
}

impl QuadReport {
    pub fn ok(&self) -> bool {
        self.antisymmetric && self.jacobi && self.symmetric && self.nondegenerate && self.ad_invariant
    }
}

/// First basis triple with `<[e_i,e_j],e_k> + <e_j,[e_i,e_k]> != 0`.
pub fn invariance_violation(lie: &LieAlgebra, gram: &QMat) -> Option<(usize, usize, usize)> {
    let n = lie.dim();
    for i in 0..n {
        let ad = lie.ad(&unit(n, i));
        let m = ad.transpose().mul(gram).add(&gram.mul(&ad));
        for j in 0..n {
            for k in 0..n {
                if !m[(j, k)].is_zero() {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

/// Check every axiom of a quadratic Lie algebra given by constants and a Gram matrix.
pub fn verify_quadratic(lie: &LieAlgebra, gram: &QMat) -> QuadReport {
    let anti = lie.antisymmetry_violation();
    let jac = lie.jacobi_violation();
    let form = QForm::new(gram.clone());
    let symmetric = form.is_ok();
    let nondegenerate = form.as_ref().map(|f| f.kernel().dim() == 0).unwrap_or(false);
    let inv = invariance_violation(lie, gram);
    let witness = if let Some((i, j)) = anti {
        Some(format!("antisymmetry fails on ({i}, {j})"))
    } else if let Some((i, j, k)) = jac {
        Some(format!("Jacobi fails on ({i}, {j}, {k})"))
    } else if let Err(e) = &form {
        Some(e.to_string())
    } else if !nondegenerate {
        Some("form is degenerate".into())
    } else {
        inv.map(|(i, j, k)| format!("ad-invariance fails on ({i}, {j}, {k})"))
    };
    QuadReport {
        antisymmetric: anti.is_none(),
        jacobi: jac.is_none(),
        symmetric,
        nondegenerate,
        ad_invariant: inv.is_none(),
        signature: form.ok().map(|f| f.signature()),
        witness,
    }
}

impl QuadLieAlgebra {
    /// Validated constructor.
    pub fn new(lie: LieAlgebra, gram: QMat) -> Result<Self, QlieError> {
        lie.validate()?;
        let form = QForm::nondegenerate(gram)?;
        if let Some((i, j, k)) = invariance_violation(&lie, form.gram()) {
            return Err(QlieError::NotInvariant(i, j, k));
        }
        Ok(QuadLieAlgebra { lie, form })
    }

    pub fn dim(&self) -> usize {
        self.lie.dim()
    }

    pub fn pair(&self, u: &[Q], v: &[Q]) -> Q {
        self.form.eval(u, v)
    }

    /// Same Lie algebra with the negated form.
    pub fn bar(&self) -> QuadLieAlgebra {
        QuadLieAlgebra { lie: self.lie.clone(), form: self.form.neg() }
    }

    pub fn product(&self, o: &QuadLieAlgebra) -> QuadLieAlgebra {
        QuadLieAlgebra { lie: self.lie.product(&o.lie), form: self.form.direct_sum(&o.form) }
    }

    /// Vector `u^flat` raised back: the vector `G^-1 a` for a covector `a`.
    pub fn raise(&self, a: &[Q]) -> Vec<Q> {
        self.form.gram().inverse().expect("nondegenerate form").mul_vec(a)
    }
}

/// Lagrangian subalgebra of a quadratic Lie algebra.
#[derive(Clone, Debug)]
pub struct ManinPair {
    pub d: QuadLieAlgebra,
    pub g: Subspace,
}

impl ManinPair {
    pub fn new(d: QuadLieAlgebra, g: Subspace) -> Result<Self, QlieError> {
        let cls = d.form.lagrangian_class(&g)?;
        if cls != LagClass::Lagrangian {
            return Err(QlieError::NotLagrangian(cls));
        }
        d.lie.check_subalgebra(&g)?;
        Ok(ManinPair { d, g })
    }
}

/// Manin pair with a lagrangian complement.
#[derive(Clone, Debug)]
pub struct QuasiManinTriple {
    pub pair: ManinPair,
    pub complement: Subspace,
}

impl QuasiManinTriple {
    pub fn new(pair: ManinPair, complement: Subspace) -> Result<Self, QlieError> {
        let cls = pair.d.form.lagrangian_class(&complement)?;
        if cls != LagClass::Lagrangian {
            return Err(QlieError::NotLagrangian(cls));
        }
        let m = pair.g.meet(&complement).dim();
        if m > 0 {
            return Err(QlieError::NotComplement(m));
        }
        Ok(QuasiManinTriple { pair, complement })
    }

    /// Columns `g_1..g_n, c^1..c^n`: the canonical basis of `g` followed by the dual basis of the complement.
    pub fn adapted_basis(&self) -> QMat {
        let d = &self.pair.d;
        let g = self.pair.g.basis();
        let c = self.complement.basis();
        let n = g.len();
        let mut m = QMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = d.pair(&c[i], &g[j]);
            }
        }
        let a = m.inverse().expect("complement pairs nondegenerately with g");
        let dual: Vec<Vec<Q>> = (0..n)
            .map(|i| (0..n).fold(vec![Q::zero(); d.dim()], |acc, k| vadd(&acc, &vscale(&c[k], &a[(i, k)]))))
            .collect();
        let cols: Vec<Vec<Q>> = g.iter().cloned().chain(dual).collect();
        QMat::from_cols(d.dim(), &cols)
    }
}

/// Lie quasi-bialgebra `(g, F, chi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieQuasiBialgebra {
    pub lie: LieAlgebra,
    /// `f[(i*n + j)*n + k] = F(e_i)(e^j, e^k)`.
    pub f: Vec<Q>,
    /// `chi[(i*n + j)*n + k] = chi(e^i, e^j, e^k)`.
    pub chi: Vec<Q>,
}

impl LieQuasiBialgebra {
    pub fn dim(&self) -> usize {
        self.lie.dim()
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.dim();
        (i * n + j) * n + k
    }

    pub fn f(&self, i: usize, j: usize, k: usize) -> &Q {
        &self.f[self.idx(i, j, k)]
    }

    pub fn chi(&self, i: usize, j: usize, k: usize) -> &Q {
        &self.chi[self.idx(i, j, k)]
    }

    /// Lie algebra structure on `g*` given by `F*`, meaningful when `chi = 0`.
    pub fn dual_lie(&self) -> LieAlgebra {
        let n = self.dim();
        let mut c = vec![Q::zero(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[(i * n + j) * n + k] = self.f(k, i, j).clone();
                }
            }
        }
        LieAlgebra::from_structure_constants(n, c)
    }
}

/// Drinfeld double `g + g*` of a Lie quasi-bialgebra, validated as a quadratic Lie algebra.
pub fn drinfeld_double(b: &LieQuasiBialgebra) -> Result<QuadLieAlgebra, QlieError> {
    let n = b.dim();
    let m = 2 * n;
    let mut c = vec![Q::zero(); m * m * m];
    let mut set = |i: usize, j: usize, k: usize, v: Q| c[(i * m + j) * m + k] += v;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // [e_i, e_j] = c_ij^k e_k
                set(i, j, k, b.lie.c(i, j, k).clone());
                // [e_i, e^j] = F(e_i)(e^j, .) + ad*_{e_i} e^j
                set(i, n + j, k, b.f(i, j, k).clone());
                set(i, n + j, n + k, -b.lie.c(i, k, j).clone());
                set(n + j, i, k, -b.f(i, j, k).clone());
                set(n + j, i, n + k, b.lie.c(i, k, j).clone());
                // [e^i, e^j] = chi(e^i, e^j, .) + F*(e^i, e^j)
                set(n + i, n + j, k, b.chi(i, j, k).clone());
                set(n + i, n + j, n + k, b.f(k, i, j).clone());
            }
        }
    }
    let lie = LieAlgebra::from_structure_constants(m, c);
    let gram = QForm::hyperbolic(n).gram().clone();
    QuadLieAlgebra::new(lie, gram)
}

/// Recover `(g, F, chi)` from a quasi-Manin triple in its adapted basis.
pub fn quasi_bialgebra_from_triple(t: &QuasiManinTriple) -> Result<LieQuasiBialgebra, QlieError> {
    let d = &t.pair.d;
    let basis = t.adapted_basis();
    let n = t.pair.g.dim();
    let cols = basis.col_vecs();
    let (g, dual) = cols.split_at(n);
    let mut lc = vec![Q::zero(); n * n * n];
    let mut f = vec![Q::zero(); n * n * n];
    let mut chi = vec![Q::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            let gg = d.lie.bracket(&g[i], &g[j]);
            let cc = d.lie.bracket(&dual[i], &dual[j]);
            for k in 0..n {
                lc[(i * n + j) * n + k] = d.pair(&gg, &dual[k]);
                f[(k * n + i) * n + j] = d.pair(&cc, &g[k]);
                chi[(i * n + j) * n + k] = d.pair(&cc, &dual[k]);
            }
        }
    }
    Ok(LieQuasiBialgebra { lie: LieAlgebra::from_structure_constants(n, lc), f, chi })
}

/// The canonical triple `(double, g, g*)` of a Lie quasi-bialgebra.
pub fn double_triple(b: &LieQuasiBialgebra) -> Result<QuasiManinTriple, QlieError> {
    let d = drinfeld_double(b)?;
    let n = b.dim();
    let g = Subspace::span(2 * n, &(0..n).map(|i| unit(2 * n, i)).collect::<Vec<_>>())?;
    let gs = Subspace::span(2 * n, &(0..n).map(|i| unit(2 * n, n + i)).collect::<Vec<_>>())?;
    QuasiManinTriple::new(ManinPair::new(d, g)?, gs)
}

/// `g + gbar` with the diagonal.
pub fn k_plus_kbar(g: &QuadLieAlgebra) -> QuadLieAlgebra {
    g.product(&g.bar())
}

pub fn diagonal(n: usize) -> Subspace {
    Subspace::span(2 * n, &(0..n).map(|i| vadd(&unit(2 * n, i), &unit(2 * n, n + i))).collect::<Vec<_>>()).expect("ambient 2n")
}

pub fn antidiagonal(n: usize) -> Subspace {
    Subspace::span(2 * n, &(0..n).map(|i| vsub(&unit(2 * n, i), &unit(2 * n, n + i))).collect::<Vec<_>>()).expect("ambient 2n")
}

/// Data for the case `g_Delta` inside `g + gbar`.
pub struct GDelta {
    /// `(g, 0, chi)` with `chi(u^, v^, w^) = 1/4 <[u,v],w>`.
    pub bialgebra: LieQuasiBialgebra,
    pub double: QuadLieAlgebra,
    /// Matrix of `(u, v^) -> (u + v/2, u - v/2)` from the double to `g + gbar`.
    pub iso: QMat,
    pub target: QuadLieAlgebra,
}

pub fn gdelta_iso(g: &QuadLieAlgebra) -> Result<GDelta, QlieError> {
    let n = g.dim();
    let ginv = g.form.gram().inverse()?;
    let b: Vec<Vec<Q>> = (0..n).map(|i| ginv.col(i)).collect();
    let mut chi = vec![Q::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            let br = g.lie.bracket(&b[i], &b[j]);
            for k in 0..n {
                chi[(i * n + j) * n + k] = g.pair(&br, &b[k]) * qf(1, 4);
            }
        }
    }
    let bialgebra = LieQuasiBialgebra { lie: g.lie.clone(), f: vec![Q::zero(); n * n * n], chi };
    let double = drinfeld_double(&bialgebra)?;
    let mut iso = QMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        iso[(i, i)] = Q::one();
        iso[(n + i, i)] = Q::one();
        for k in 0..n {
            let h = &ginv[(k, i)] * qf(1, 2);
            iso[(k, n + i)] = h.clone();
            iso[(n + k, n + i)] = -h;
        }
    }
    Ok(GDelta { bialgebra, double, iso, target: k_plus_kbar(g) })
}

/// Whether `t` is an isomorphism of quadratic Lie algebras.
pub fn is_quadratic_iso(from: &QuadLieAlgebra, to: &QuadLieAlgebra, t: &QMat) -> bool {
    t.rows == to.dim()
        && t.cols == from.dim()
        && t.inverse().is_ok()
        && from.lie.is_hom_into(&to.lie, t)
        && t.transpose().mul(to.form.gram()).mul(t) == *from.form.gram()
}

/// Random lagrangian complement of `pair.g`, as the graph of a skew map from `reference` into `g`.
pub fn random_complement<R: Rng>(pair: &ManinPair, reference: &Subspace, rng: &mut R) -> Result<Subspace, QlieError> {
    let c = reference.basis();
    let g = pair.g.basis();
    let n = c.len();
    let mut p = QMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = pair.d.pair(&c[i], &g[j]);
        }
    }
    let mut s = QMat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let x = crate::polycal::random_q(rng);
            s[(i, j)] = x.clone();
            s[(j, i)] = -x;
        }
    }
    let a = p.inverse()?.mul(&s);
    let vecs: Vec<Vec<Q>> = (0..n)
        .map(|j| (0..n).fold(c[j].clone(), |acc, k| vadd(&acc, &vscale(&g[k], &a[(k, j)]))))
        .collect();
    Ok(Subspace::span(pair.d.dim(), &vecs)?)
}

fn m2(v: [i64; 4]) -> QMat {
    QMat::from_i64(2, 2, &v)
}

fn elem(n: usize, i: usize, j: usize) -> QMat {
    let mut m = QMat::zeros(n, n);
    m[(i, j)] = Q::one();
    m
}

/// Realification of `re + i*im` as a real matrix of twice the size.
pub fn realify(re: &QMat, im: &QMat) -> QMat {
    let n = re.rows;
    let mut r = QMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = re[(i, j)].clone();
            r[(n + i, n + j)] = re[(i, j)].clone();
            r[(i, n + j)] = -im[(i, j)].clone();
            r[(n + i, j)] = im[(i, j)].clone();
        }
    }
    r
}

/// `sl(2)` with basis `e, f, h` and the trace form.
pub fn sl2_matrix() -> MatrixLieAlgebra {
    MatrixLieAlgebra::new(vec![m2([0, 1, 0, 0]), m2([0, 0, 1, 0]), m2([1, 0, 0, -1])]).expect("sl2 basis")
}

/// `su(2)` realified, with basis `-i sigma_k / 2` and the form `Re tr(xy)` of the complex matrices.
pub fn su2_matrix() -> MatrixLieAlgebra {
    let z = QMat::zeros(2, 2);
    let h = |m: QMat| m.scale(&qf(-1, 2));
    let b1 = realify(&z, &h(m2([0, 1, 1, 0])));
    let b2 = realify(&m2([0, -1, 1, 0]).scale(&qf(1, 2)), &z);
    let b3 = realify(&z, &h(m2([1, 0, 0, -1])));
    MatrixLieAlgebra::new(vec![b1, b2, b3]).expect("su2 basis")
}

/// `gl(2)` with basis `E11, E12, E21, E22` and the trace form.
pub fn gl2_matrix() -> MatrixLieAlgebra {
    MatrixLieAlgebra::new(vec![elem(2, 0, 0), elem(2, 0, 1), elem(2, 1, 0), elem(2, 1, 1)]).expect("gl2 basis")
}

/// `sl(3)` with basis `E12, E13, E23, E21, E31, E32, H1, H2` and the trace form.
pub fn sl3_matrix() -> MatrixLieAlgebra {
    let mut b = vec![elem(3, 0, 1), elem(3, 0, 2), elem(3, 1, 2), elem(3, 1, 0), elem(3, 2, 0), elem(3, 2, 1)];
    b.push(elem(3, 0, 0).sub(&elem(3, 1, 1)));
    b.push(elem(3, 1, 1).sub(&elem(3, 2, 2)));
    MatrixLieAlgebra::new(b).expect("sl3 basis")
}

/// `sl(2, C)` as a real Lie algebra, with the form `Re tr(xy)`.
pub fn sl2c_matrix() -> MatrixLieAlgebra {
    let z = QMat::zeros(2, 2);
    let s = sl2_matrix();
    let mut b: Vec<QMat> = s.basis.iter().map(|m| realify(m, &z)).collect();
    b.extend(s.basis.iter().map(|m| realify(&z, m)));
    MatrixLieAlgebra::new(b).expect("sl2c basis")
}

/// Trace-form scale for which `scale * tr` of the matrices equals the intended form.
pub fn trace_scale(name: &str) -> Q {
    match name {
        "su2" | "sl2c" => qf(1, 2),
        _ => Q::one(),
    }
}

fn quad_from_matrix(m: &MatrixLieAlgebra, scale: &Q) -> QuadLieAlgebra {
    QuadLieAlgebra::new(m.lie.clone(), m.trace_gram(scale)).expect("trace form is invariant and nondegenerate")
}

pub fn sl2_trace() -> QuadLieAlgebra {
    quad_from_matrix(&sl2_matrix(), &q(1))
}

pub fn su2_trace() -> QuadLieAlgebra {
    quad_from_matrix(&su2_matrix(), &trace_scale("su2"))
}

pub fn gl2_trace() -> QuadLieAlgebra {
    quad_from_matrix(&gl2_matrix(), &q(1))
}

pub fn sl3_trace() -> QuadLieAlgebra {
    quad_from_matrix(&sl3_matrix(), &q(1))
}

/// `s = {(u, v) in b+ x b- : pr_t u + pr_t v = 0}` inside `g + gbar` for `sl(n)` in the bases above.
pub fn gauss_s(m: &MatrixLieAlgebra) -> Subspace {
    let n = m.dim();
    let size = m.basis[0].rows;
    let mut vecs = Vec::new();
    let zero = vec![Q::zero(); n];
    for i in 0..size {
        for j in 0..size {
            if i < j {
                let up = m.coords(&elem(size, i, j)).expect("upper entry in algebra");
                let lo = m.coords(&elem(size, j, i)).expect("lower entry in algebra");
                vecs.push(crate::exactla::vcat(&[&up, &zero]));
                vecs.push(crate::exactla::vcat(&[&zero, &lo]));
            }
        }
    }
    for i in 0..size - 1 {
        let h = m.coords(&elem(size, i, i).sub(&elem(size, i + 1, i + 1))).expect("cartan element");
        vecs.push(crate::exactla::vcat(&[&h, &vscale(&h, &q(-1))]));
    }
    Subspace::span(2 * n, &vecs).expect("ambient 2n")
}

pub fn gauss_s_sl2() -> Subspace {
    gauss_s(&sl2_matrix())
}

pub fn gauss_s_sl3() -> Subspace {
    gauss_s(&sl3_matrix())
}

/// Manin triple `(sl2 + sl2bar, diagonal, s)`.
pub fn standard_triple_sl2() -> QuasiManinTriple {
    let d = k_plus_kbar(&sl2_trace());
    let pair = ManinPair::new(d, diagonal(3)).expect("diagonal is a lagrangian subalgebra");
    QuasiManinTriple::new(pair, gauss_s_sl2()).expect("s is a lagrangian complement")
}

/// Standard Lie bialgebra structure on `sl(2)`.
pub fn standard_bialgebra_sl2() -> LieQuasiBialgebra {
    quasi_bialgebra_from_triple(&standard_triple_sl2()).expect("triple is valid")
}

/// Dual Lie algebra `sl(2)*` of the standard bialgebra.
pub fn gstar_sl2() -> LieAlgebra {
    standard_bialgebra_sl2().dual_lie()
}

/// Named catalog items.
#[derive(Clone, Debug)]
pub enum CatalogItem {
    Quadratic(QuadLieAlgebra),
    Pair(ManinPair),
    Bialgebra(LieQuasiBialgebra),
    Lie(LieAlgebra),
}

pub const CATALOG_NAMES: &[&str] = &[
    "sl2_trace",
    "su2_trace",
    "gl2_trace",
    "sl3_trace",
    "sl2_plus_sl2bar",
    "gauss_s_sl2",
    "gauss_s_sl3",
    "standard_bialgebra_sl2",
    "gstar_sl2",
];

pub fn catalog(name: &str) -> Option<CatalogItem> {
    let gs = |g: QuadLieAlgebra, s: Subspace| {
        CatalogItem::Pair(ManinPair::new(k_plus_kbar(&g), s).expect("s is a lagrangian subalgebra"))
    };
    Some(match name {
        "sl2_trace" => CatalogItem::Quadratic(sl2_trace()),
        "su2_trace" => CatalogItem::Quadratic(su2_trace()),
        "gl2_trace" => CatalogItem::Quadratic(gl2_trace()),
        "sl3_trace" => CatalogItem::Quadratic(sl3_trace()),
        "sl2_plus_sl2bar" => CatalogItem::Pair(ManinPair::new(k_plus_kbar(&sl2_trace()), diagonal(3)).ok()?),
        "gauss_s_sl2" => gs(sl2_trace(), gauss_s_sl2()),
        "gauss_s_sl3" => gs(sl3_trace(), gauss_s_sl3()),
        "standard_bialgebra_sl2" => CatalogItem::Bialgebra(standard_bialgebra_sl2()),
        "gstar_sl2" => CatalogItem::Lie(gstar_sl2()),
        _ => return None,
    })
}

/// `quasi_bialgebra_from_triple` after `double_triple` is the identity on the standard
/// bialgebra of `sl2` and on `count` random quasi-Manin triples over `sl2 + sl2bar`.
///
/// Returns a description of the first instance where the round trip fails.
pub fn double_round_trips<R: Rng>(count: usize, rng: &mut R) -> Result<Option<String>, QlieError> {
    let std = standard_bialgebra_sl2();
    if quasi_bialgebra_from_triple(&double_triple(&std)?)? != std {
        return Ok(Some("standard bialgebra of sl2".into()));
    }
    let pair = ManinPair::new(k_plus_kbar(&sl2_trace()), diagonal(3))?;
    for i in 0..count {
        let c = random_complement(&pair, &antidiagonal(3), rng)?;
        let t = QuasiManinTriple::new(pair.clone(), c)?;
        let b = quasi_bialgebra_from_triple(&t)?;
        let dt = double_triple(&b)?;
        if quasi_bialgebra_from_triple(&dt)? != b || !is_quadratic_iso(&dt.pair.d, &t.pair.d, &t.adapted_basis()) {
            return Ok(Some(format!("random triple {i} with complement {:?}", t.complement.basis())));
        }
    }
    Ok(None)
}

/// First basis triple where `chi` of the triple `(g + gbar, g_Delta, antidiagonal)` differs from
/// `1/4 <[u, v], w>`, where `u, v, w` are the elements of `g` dual to the basis covectors.
pub fn chi_quarter_violation(g: &QuadLieAlgebra) -> Result<Option<(usize, usize, usize)>, QlieError> {
    let n = g.dim();
    let pair = ManinPair::new(k_plus_kbar(g), diagonal(n))?;
    let b = quasi_bialgebra_from_triple(&QuasiManinTriple::new(pair, antidiagonal(n))?)?;
    let ginv = g.form.gram().inverse()?;
    let dual: Vec<Vec<Q>> = (0..n).map(|i| ginv.col(i)).collect();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let expect = cartan_three_tensor(g, &dual[i], &dual[j], &dual[k]) * qf(1, 4);
                if *b.chi(i, j, k) != expect {
                    return Ok(Some((i, j, k)));
                }
            }
        }
    }
    Ok(None)
}

/// `<[u, v], w>` for a quadratic Lie algebra.
pub fn cartan_three_tensor(g: &QuadLieAlgebra, u: &[Q], v: &[Q], w: &[Q]) -> Q {
    dot(&g.lie.bracket(u, v), &g.form.gram().mul_vec(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalog_algebras_are_quadratic() {
        for g in [sl2_trace(), su2_trace(), gl2_trace(), sl3_trace()] {
            assert!(verify_quadratic(&g.lie, g.form.gram()).ok());
        }
        let s = su2_trace().form.signature();
        assert_eq!((s.pos, s.neg), (0, 3));
        let s = sl2_trace().form.signature();
        assert_eq!((s.pos, s.neg), (2, 1));
        let g = sl2c_matrix();
        let sig = QForm::new(g.trace_gram(&trace_scale("sl2c"))).unwrap().signature();
        assert_eq!((sig.pos, sig.neg), (3, 3));
    }

    #[test]
    fn su2_structure_constants_are_cyclic() {
        let g = su2_trace();
        let e = |i| unit(3, i);
        assert_eq!(g.lie.bracket(&e(0), &e(1)), vscale(&e(2), &q(-1)));
        assert_eq!(*g.form.gram(), QMat::identity(3).scale(&qf(-1, 2)));
    }

    #[test]
    fn verify_quadratic_reports_failures() {
        let g = sl2_trace();
        let mut bad = g.form.gram().clone();
        bad[(2, 2)] = q(3);
        let r = verify_quadratic(&g.lie, &bad);
        assert!(!r.ad_invariant && r.nondegenerate);
        let mut c = g.lie.c.clone();
        c[0] += q(1);
        let r = verify_quadratic(&LieAlgebra::from_structure_constants(3, c), g.form.gram());
        assert!(!r.antisymmetric);
    }

    #[test]
    fn double_of_standard_bialgebra_round_trips() {
        let b = standard_bialgebra_sl2();
        assert!(b.chi.iter().all(Zero::is_zero));
        let t = double_triple(&b).unwrap();
        assert_eq!(quasi_bialgebra_from_triple(&t).unwrap(), b);
        let st = standard_triple_sl2();
        let basis = st.adapted_basis();
        assert!(is_quadratic_iso(&t.pair.d, &st.pair.d, &basis));
    }

    #[test]
    fn random_triples_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = k_plus_kbar(&sl2_trace());
        let pair = ManinPair::new(d, diagonal(3)).unwrap();
        for _ in 0..5 {
            let c = random_complement(&pair, &antidiagonal(3), &mut rng).unwrap();
            let t = QuasiManinTriple::new(pair.clone(), c).unwrap();
            let b = quasi_bialgebra_from_triple(&t).unwrap();
            let dt = double_triple(&b).unwrap();
            assert_eq!(quasi_bialgebra_from_triple(&dt).unwrap(), b);
            assert!(is_quadratic_iso(&dt.pair.d, &t.pair.d, &t.adapted_basis()));
        }
    }

    #[test]
    fn gdelta_chi_and_isomorphism() {
        for g in [sl2_trace(), su2_trace()] {
            let gd = gdelta_iso(&g).unwrap();
            assert!(is_quadratic_iso(&gd.double, &gd.target, &gd.iso));
            // g maps onto the diagonal and g* onto the antidiagonal.
            let n = g.dim();
            let top = Subspace::span(2 * n, &(0..n).map(|i| unit(2 * n, i)).collect::<Vec<_>>()).unwrap();
            let bottom = Subspace::span(2 * n, &(0..n).map(|i| unit(2 * n, n + i)).collect::<Vec<_>>()).unwrap();
            assert_eq!(top.image(&gd.iso), diagonal(n));
            assert_eq!(bottom.image(&gd.iso), antidiagonal(n));
        }
    }

    #[test]
    fn broken_quasi_bialgebra_is_rejected() {
        let mut b = standard_bialgebra_sl2();
        b.f[1] += q(1);
        assert!(drinfeld_double(&b).is_err());
    }

    #[test]
    fn gauss_subalgebras() {
        let s3 = gauss_s_sl3();
        assert_eq!(s3.dim(), 8);
        assert!(matches!(catalog("gauss_s_sl3"), Some(CatalogItem::Pair(_))));
        assert!(catalog("nope").is_none());
        let gs = gstar_sl2();
        assert!(gs.validate().is_ok());
    }

    #[test]
    fn chi_is_quarter_cartan_tensor() {
        for g in [sl2_trace(), su2_trace(), gl2_trace()] {
            assert_eq!(chi_quarter_violation(&g).unwrap(), None);
        }
        let mut g = su2_trace();
        g.lie = LieAlgebra::abelian(3);
        assert_eq!(chi_quarter_violation(&g).unwrap(), None);
    }

    #[test]
    fn non_lagrangian_pair_rejected() {
        let d = k_plus_kbar(&sl2_trace());
        let s = Subspace::span(6, &[unit(6, 0)]).unwrap();
        assert!(matches!(ManinPair::new(d, s), Err(QlieError::NotLagrangian(LagClass::Isotropic))));
    }
}
