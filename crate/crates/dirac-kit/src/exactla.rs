//! Exact linear algebra over the rationals.
//!
//! Matrices, subspaces kept in reduced row echelon form, symmetric bilinear
//! forms and the lagrangian/isotropic classification of subspaces of a
//! quadratic vector space. Every routine here is exact; no tolerance is used.

use num::{BigInt, BigRational, One, Signed, Zero};
use std::fmt;
use thiserror::Error;

/// Exact rational scalar.
pub type Q = BigRational;

/// Integer as a rational.
pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Fraction `n/d` as a rational.
pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parse `"p/q"`, `"p"` or a finite decimal such as `"-0.25"`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((a, b)) = s.split_once('.') {
        let neg = a.starts_with('-');
        let ip: BigInt = if a == "-" || a.is_empty() { BigInt::zero() } else { a.parse().ok()? };
        if !b.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let fp: BigInt = if b.is_empty() { BigInt::zero() } else { b.parse().ok()? };
        let den = num::pow(BigInt::from(10), b.len());
        let frac = Q::new(fp, den);
        let ipq = Q::from_integer(ip.abs());
        let v = ipq + frac;
        return Some(if neg { -v } else { v });
    }
    s.parse::<BigInt>().ok().map(Q::from_integer)
}

/// Nearest `f64` to a rational.
pub fn to_f64(x: &Q) -> f64 {
    use num::ToPrimitive;
    x.to_f64().unwrap_or_else(|| {
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Errors raised by the exact linear algebra layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinAlgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bilinear form is not symmetric at entry ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("bilinear form is degenerate (kernel dimension {0})")]
    DegenerateForm(usize),
    #[error("matrix is singular")]
    Singular,
}

/// Dense rational matrix stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Q>,
}

impl fmt::Debug for QMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QMat {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMat { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    /// Build from row vectors; all rows must share the given column count.
    pub fn from_rows(cols: usize, rows: &[Vec<Q>]) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "row length");
            for (j, x) in r.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    /// Build from column vectors of the given length.
    pub fn from_cols(rows: usize, cols: &[Vec<Q>]) -> Self {
        Self::from_rows(rows, cols).transpose()
    }

    pub fn from_i64(rows: usize, cols: usize, v: &[i64]) -> Self {
        assert_eq!(v.len(), rows * cols);
        QMat { rows, cols, data: v.iter().map(|&x| q(x)).collect() }
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<Q>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn col_vecs(&self) -> Vec<Vec<Q>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, o: &QMat) -> QMat {
        assert_eq!(self.cols, o.rows, "matrix product shape");
        let mut r = QMat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = &o[(k, j)];
                    if !b.is_zero() {
                        r[(i, j)] += a * b;
                    }
                }
            }
        }
        r
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape");
        (0..self.rows)
            .map(|i| {
                let mut s = Q::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        s += a * b;
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &QMat) -> QMat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        QMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &QMat) -> QMat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        QMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: &Q) -> QMat {
        QMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn neg(&self) -> QMat {
        self.scale(&q(-1))
    }

    pub fn trace(&self) -> Q {
        (0..self.rows.min(self.cols)).fold(Q::zero(), |s, i| s + &self[(i, i)])
    }

    /// Block diagonal sum.
    pub fn block_diag(&self, o: &QMat) -> QMat {
        let mut r = QMat::zeros(self.rows + o.rows, self.cols + o.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                r[(i, j)] = self[(i, j)].clone();
            }
        }
        for i in 0..o.rows {
            for j in 0..o.cols {
                r[(self.rows + i, self.cols + j)] = o[(i, j)].clone();
            }
        }
        r
    }

    /// Horizontal concatenation `[self | o]`.
    pub fn hcat(&self, o: &QMat) -> QMat {
        assert_eq!(self.rows, o.rows);
        let mut r = QMat::zeros(self.rows, self.cols + o.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                r[(i, j)] = self[(i, j)].clone();
            }
            for j in 0..o.cols {
                r[(i, self.cols + j)] = o[(i, j)].clone();
            }
        }
        r
    }

    /// Vertical concatenation.
    pub fn vcat(&self, o: &QMat) -> QMat {
        assert_eq!(self.cols, o.cols);
        let mut data = self.data.clone();
        data.extend(o.data.iter().cloned());
        QMat { rows: self.rows + o.rows, cols: self.cols, data }
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (QMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m[(r, c)].recip();
            for j in c..m.cols {
                let v = &m[(r, j)] * &inv;
                m[(r, j)] = v;
            }
            for i in 0..m.rows {
                if i == r || m[(i, c)].is_zero() {
                    continue;
                }
                let f = m[(i, c)].clone();
                for j in c..m.cols {
                    if m[(r, j)].is_zero() {
                        continue;
                    }
                    let v = &m[(i, j)] - &f * &m[(r, j)];
                    m[(i, j)] = v;
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel `{x : self * x = 0}`.
    pub fn kernel(&self) -> Vec<Vec<Q>> {
        let (r, piv) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !piv.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (i, &p) in piv.iter().enumerate() {
                    v[p] = -r[(i, f)].clone();
                }
                v
            })
            .collect()
    }

    pub fn inverse(&self) -> Result<QMat, LinAlgError> {
        if self.rows != self.cols {
            return Err(LinAlgError::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        let (r, piv) = self.hcat(&QMat::identity(n)).rref();
        if piv.len() < n || piv[n - 1] != n - 1 {
            return Err(LinAlgError::Singular);
        }
        let mut inv = QMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = r[(i, n + j)].clone();
            }
        }
        Ok(inv)
    }

    pub fn det(&self) -> Q {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Q::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else { return Q::zero() };
            if p != c {
                for j in 0..n {
                    m.data.swap(p * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = m[(c, c)].clone();
            det *= &piv;
            for i in c + 1..n {
                if m[(i, c)].is_zero() {
                    continue;
                }
                let f = &m[(i, c)] / &piv;
                for j in c..n {
                    let v = &m[(i, j)] - &f * &m[(c, j)];
                    m[(i, j)] = v;
                }
            }
        }
        det
    }

    /// Solve `self * x = b`; returns one solution when consistent.
    pub fn solve(&self, b: &[Q]) -> Option<Vec<Q>> {
        assert_eq!(self.rows, b.len());
        let aug = self.hcat(&QMat::from_cols(self.rows, &[b.to_vec()]));
        let (r, piv) = aug.rref();
        if piv.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Q::zero(); self.cols];
        for (i, &p) in piv.iter().enumerate() {
            x[p] = r[(i, self.cols)].clone();
        }
        Some(x)
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(&self[(i, j)]))
    }
}

impl std::ops::Index<(usize, usize)> for QMat {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for QMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product of two rational vectors.
pub fn dot(a: &[Q], b: &[Q]) -> Q {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Q::zero(), |s, (x, y)| if x.is_zero() || y.is_zero() { s } else { s + x * y })
}

pub fn vadd(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vscale(a: &[Q], s: &Q) -> Vec<Q> {
    a.iter().map(|x| x * s).collect()
}

pub fn is_zero_vec(a: &[Q]) -> bool {
    a.iter().all(|x| x.is_zero())
}

/// Standard basis vector `e_i` of `Q^n`.
pub fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = Q::one();
    v
}

/// Concatenate vectors.
pub fn vcat(parts: &[&[Q]]) -> Vec<Q> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

/// Linear subspace of `Q^n`, stored by its canonical RREF basis.
///
/// Two subspaces are equal exactly when their canonical bases coincide, so
/// the derived `PartialEq` is subspace equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<Q>>,
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subspace(dim {} in Q^{}) ", self.dim(), self.ambient)?;
        let rows: Vec<String> = self
            .basis
            .iter()
            .map(|r| format!("[{}]", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
            .collect();
        write!(f, "{{{}}}", rows.join(", "))
    }
}

impl Subspace {
    /// Span of the given vectors; fails if a vector has the wrong length.
    pub fn span(ambient: usize, vecs: &[Vec<Q>]) -> Result<Self, LinAlgError> {
        for v in vecs {
            if v.len() != ambient {
                return Err(LinAlgError::DimensionMismatch { expected: ambient, found: v.len() });
            }
        }
        if vecs.is_empty() {
            return Ok(Self::zero(ambient));
        }
        let (r, piv) = QMat::from_rows(ambient, vecs).rref();
        let basis = (0..piv.len()).map(|i| r.row(i).to_vec()).collect();
        Ok(Subspace { ambient, basis })
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, basis: Vec::new() }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace { ambient, basis: (0..ambient).map(|i| unit(ambient, i)).collect() }
    }

    /// Kernel of a matrix, as a subspace of its domain.
    pub fn kernel_of(m: &QMat) -> Self {
        Self::span(m.cols, &m.kernel()).expect("kernel vectors have domain length")
    }

    /// Image of a matrix, as a subspace of its codomain.
    pub fn image_of(m: &QMat) -> Self {
        Self::span(m.rows, &m.col_vecs()).expect("columns have codomain length")
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Q>] {
        &self.basis
    }

    /// Basis vectors as the columns of an `ambient x dim` matrix.
    pub fn basis_matrix(&self) -> QMat {
        QMat::from_cols(self.ambient, &self.basis)
    }

    pub fn contains(&self, v: &[Q]) -> bool {
        assert_eq!(v.len(), self.ambient);
        let mut rows = self.basis.clone();
        rows.push(v.to_vec());
        QMat::from_rows(self.ambient, &rows).rank() == self.dim()
    }

    pub fn contains_subspace(&self, o: &Subspace) -> bool {
        o.basis.iter().all(|v| self.contains(v))
    }

    pub fn join(&self, o: &Subspace) -> Subspace {
        assert_eq!(self.ambient, o.ambient);
        let mut v = self.basis.clone();
        v.extend(o.basis.iter().cloned());
        Subspace::span(self.ambient, &v).expect("same ambient")
    }

    pub fn meet(&self, o: &Subspace) -> Subspace {
        assert_eq!(self.ambient, o.ambient);
        if self.dim() == 0 || o.dim() == 0 {
            return Subspace::zero(self.ambient);
        }
        // Solve sum a_i u_i - sum b_j w_j = 0.
        let m = self.basis_matrix().hcat(&o.basis_matrix().neg());
        let vecs: Vec<Vec<Q>> = m
            .kernel()
            .iter()
            .map(|k| {
                let mut v = vec![Q::zero(); self.ambient];
                for (i, b) in self.basis.iter().enumerate() {
                    if !k[i].is_zero() {
                        v = vadd(&v, &vscale(b, &k[i]));
                    }
                }
                v
            })
            .collect();
        Subspace::span(self.ambient, &vecs).expect("same ambient")
    }

    /// Intersection and sum in one call.
    pub fn meet_join(&self, o: &Subspace) -> (Subspace, Subspace) {
        (self.meet(o), self.join(o))
    }

    /// Image under a linear map given as a matrix acting on column vectors.
    pub fn image(&self, m: &QMat) -> Subspace {
        assert_eq!(m.cols, self.ambient);
        let v: Vec<Vec<Q>> = self.basis.iter().map(|b| m.mul_vec(b)).collect();
        Subspace::span(m.rows, &v).expect("codomain length")
    }

    /// Preimage `{x : m x in self}`.
    pub fn preimage(&self, m: &QMat) -> Subspace {
        assert_eq!(m.rows, self.ambient);
        // x with m x in span(basis): [m | -B] (x, c) = 0.
        let big = m.hcat(&self.basis_matrix().neg());
        let vecs: Vec<Vec<Q>> = big.kernel().into_iter().map(|k| k[..m.cols].to_vec()).collect();
        Subspace::span(m.cols, &vecs).expect("domain length")
    }

    /// Direct product `self x o` inside `Q^(n+m)`.
    pub fn product(&self, o: &Subspace) -> Subspace {
        let n = self.ambient + o.ambient;
        let mut v: Vec<Vec<Q>> =
            self.basis.iter().map(|b| vcat(&[b, &vec![Q::zero(); o.ambient]])).collect();
        v.extend(o.basis.iter().map(|b| vcat(&[&vec![Q::zero(); self.ambient], b])));
        Subspace::span(n, &v).expect("product ambient")
    }

    /// Coordinates of `v` in the canonical basis, when `v` lies in the subspace.
    pub fn coordinates(&self, v: &[Q]) -> Option<Vec<Q>> {
        self.basis_matrix().solve(v)
    }
}

/// Symmetric bilinear form on `Q^n` given by its Gram matrix.
#[derive(Clone, PartialEq, Debug)]
pub struct QForm {
    gram: QMat,
}

/// Signature `(positive, negative, zero)` of a symmetric form.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub struct Signature {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

impl QForm {
    /// Accepts any symmetric Gram matrix; degeneracy is allowed here.
    pub fn new(gram: QMat) -> Result<Self, LinAlgError> {
        if gram.rows != gram.cols {
            return Err(LinAlgError::DimensionMismatch { expected: gram.rows, found: gram.cols });
        }
        for i in 0..gram.rows {
            for j in 0..i {
                if gram[(i, j)] != gram[(j, i)] {
                    return Err(LinAlgError::NotSymmetric(i, j));
                }
            }
        }
        Ok(QForm { gram })
    }

    /// Symmetric and nondegenerate.
    pub fn nondegenerate(gram: QMat) -> Result<Self, LinAlgError> {
        let f = Self::new(gram)?;
        let k = f.kernel().dim();
        if k > 0 {
            return Err(LinAlgError::DegenerateForm(k));
        }
        Ok(f)
    }

    pub fn diagonal(d: &[Q]) -> Self {
        let mut g = QMat::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            g[(i, i)] = x.clone();
        }
        QForm { gram: g }
    }

    /// Canonical split pairing on `V + V*`: `<(x,a),(y,b)> = a(y) + b(x)`.
    pub fn hyperbolic(n: usize) -> Self {
        let mut g = QMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            g[(i, n + i)] = Q::one();
            g[(n + i, i)] = Q::one();
        }
        QForm { gram: g }
    }

    pub fn dim(&self) -> usize {
        self.gram.rows
    }

    pub fn gram(&self) -> &QMat {
        &self.gram
    }

    pub fn eval(&self, u: &[Q], v: &[Q]) -> Q {
        dot(u, &self.gram.mul_vec(v))
    }

    pub fn neg(&self) -> QForm {
        QForm { gram: self.gram.neg() }
    }

    /// Orthogonal direct sum.
    pub fn direct_sum(&self, o: &QForm) -> QForm {
        QForm { gram: self.gram.block_diag(&o.gram) }
    }

    pub fn kernel(&self) -> Subspace {
        Subspace::kernel_of(&self.gram)
    }

    /// Exact signature by symmetric Gaussian elimination.
    pub fn signature(&self) -> Signature {
        let n = self.dim();
        let mut a = self.gram.clone();
        let (mut pos, mut neg) = (0, 0);
        let mut active: Vec<usize> = (0..n).collect();
        while !active.is_empty() {
            if let Some(&p) = active.iter().find(|&&i| !a[(i, i)].is_zero()) {
                let d = a[(p, p)].clone();
                if d.is_positive() {
                    pos += 1;
                } else {
                    neg += 1;
                }
                active.retain(|&i| i != p);
                for &i in &active {
                    if a[(i, p)].is_zero() {
                        continue;
                    }
                    let f = &a[(i, p)] / &d;
                    for &j in &active {
                        let v = &a[(i, j)] - &f * &a[(p, j)];
                        a[(i, j)] = v;
                    }
                }
                continue;
            }
            // All remaining diagonal entries vanish; use an off-diagonal pivot.
            let pair = active.iter().flat_map(|&i| active.iter().map(move |&j| (i, j))).find(|&(i, j)| i != j && !a[(i, j)].is_zero());
            let Some((i, j)) = pair else { break };
            // Replace e_i by e_i + e_j, which has value 2 a_ij.
            for &k in &active {
                let v = &a[(i, k)] + &a[(j, k)];
                a[(i, k)] = v;
            }
            for &k in &active {
                let v = &a[(k, i)] + &a[(k, j)];
                a[(k, i)] = v;
            }
        }
        let zero = n - pos - neg;
        Signature { pos, neg, zero }
    }

    /// `W^perp = {v : <v, w> = 0 for all w in W}`.
    pub fn orth_complement(&self, w: &Subspace) -> Subspace {
        assert_eq!(w.ambient(), self.dim());
        if w.dim() == 0 {
            return Subspace::full(self.dim());
        }
        let rows: Vec<Vec<Q>> = w.basis().iter().map(|b| self.gram.mul_vec(b)).collect();
        Subspace::kernel_of(&QMat::from_rows(self.dim(), &rows))
    }

    /// Gram matrix of the form restricted to a list of vectors.
    pub fn restricted_gram(&self, vecs: &[Vec<Q>]) -> QMat {
        let k = vecs.len();
        let mut m = QMat::zeros(k, k);
        for i in 0..k {
            let gi = self.gram.mul_vec(&vecs[i]);
            for j in 0..k {
                m[(i, j)] = dot(&gi, &vecs[j]);
            }
        }
        m
    }

    pub fn is_isotropic(&self, w: &Subspace) -> bool {
        self.restricted_gram(w.basis()).is_zero()
    }

    /// Classify `w` with respect to this form, which must be nondegenerate.
    pub fn lagrangian_class(&self, w: &Subspace) -> Result<LagClass, LinAlgError> {
        if w.ambient() != self.dim() {
            return Err(LinAlgError::DimensionMismatch { expected: self.dim(), found: w.ambient() });
        }
        let k = self.kernel().dim();
        if k > 0 {
            return Err(LinAlgError::DegenerateForm(k));
        }
        let perp = self.orth_complement(w);
        Ok(if perp == *w {
            LagClass::Lagrangian
        } else if perp.contains_subspace(w) {
            LagClass::Isotropic
        } else if w.contains_subspace(&perp) {
            LagClass::Coisotropic
        } else {
            LagClass::Neither
        })
    }
}

/// Position of a subspace relative to its orthogonal complement.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub enum LagClass {
    Lagrangian,
    Isotropic,
    Coisotropic,
    Neither,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6"), Some(qf(1, 2)));
        assert_eq!(parse_q("-0.25"), Some(qf(-1, 4)));
        assert_eq!(parse_q("-.5"), Some(qf(-1, 2)));
        assert_eq!(parse_q("7"), Some(q(7)));
        assert_eq!(parse_q("1/0"), None);
        assert_eq!(parse_q("x"), None);
    }

    #[test]
    fn rref_kernel_inverse() {
        let m = QMat::from_i64(2, 3, &[1, 2, 3, 2, 4, 6]);
        assert_eq!(m.rank(), 1);
        let k = m.kernel();
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(is_zero_vec(&m.mul_vec(v)));
        }
        let a = QMat::from_i64(2, 2, &[2, 1, 1, 1]);
        let ai = a.inverse().unwrap();
        assert_eq!(a.mul(&ai), QMat::identity(2));
        assert_eq!(a.det(), q(1));
        assert_eq!(QMat::from_i64(2, 2, &[1, 2, 2, 4]).inverse(), Err(LinAlgError::Singular));
    }

    #[test]
    fn subspace_equality_is_canonical() {
        let a = Subspace::span(3, &[vec![q(1), q(1), q(0)], vec![q(0), q(1), q(1)]]).unwrap();
        let b = Subspace::span(3, &[vec![q(1), q(2), q(1)], vec![q(1), q(0), q(-1)]]).unwrap();
        assert_eq!(a, b);
        let c = Subspace::span(3, &[vec![q(0), q(0), q(1)]]).unwrap();
        let (m, j) = a.meet_join(&c);
        assert_eq!(m.dim(), 0);
        assert_eq!(j, Subspace::full(3));
        assert!(matches!(Subspace::span(2, &[vec![q(1)]]), Err(LinAlgError::DimensionMismatch { .. })));
    }

    #[test]
    fn meet_dimension_formula() {
        let a = Subspace::span(4, &[unit(4, 0), unit(4, 1), unit(4, 2)]).unwrap();
        let b = Subspace::span(4, &[unit(4, 1), vadd(&unit(4, 2), &unit(4, 3)), unit(4, 0)]).unwrap();
        let (m, j) = a.meet_join(&b);
        assert_eq!(m.dim() + j.dim(), a.dim() + b.dim());
        assert_eq!(m.dim(), 2);
    }

    #[test]
    fn signature_and_classes() {
        let h = QForm::hyperbolic(2);
        assert_eq!(h.signature(), Signature { pos: 2, neg: 2, zero: 0 });
        let l = Subspace::span(4, &[unit(4, 0), unit(4, 1)]).unwrap();
        assert_eq!(h.lagrangian_class(&l).unwrap(), LagClass::Lagrangian);
        let i = Subspace::span(4, &[unit(4, 0)]).unwrap();
        assert_eq!(h.lagrangian_class(&i).unwrap(), LagClass::Isotropic);
        let c = Subspace::span(4, &[unit(4, 0), unit(4, 1), unit(4, 2)]).unwrap();
        assert_eq!(h.lagrangian_class(&c).unwrap(), LagClass::Coisotropic);
        let n = Subspace::span(4, &[unit(4, 0), unit(4, 2)]).unwrap();
        assert_eq!(h.lagrangian_class(&n).unwrap(), LagClass::Neither);
        let d = QForm::new(QMat::from_i64(2, 2, &[1, 0, 0, 0])).unwrap();
        assert_eq!(d.signature(), Signature { pos: 1, neg: 0, zero: 1 });
        assert!(matches!(d.lagrangian_class(&Subspace::zero(2)), Err(LinAlgError::DegenerateForm(1))));
        assert!(matches!(QForm::new(QMat::from_i64(2, 2, &[0, 1, 2, 0])), Err(LinAlgError::NotSymmetric(1, 0))));
    }

    #[test]
    fn signature_of_split_sum() {
        let g = QForm::diagonal(&[q(2), q(-3), q(5)]);
        let s = g.direct_sum(&g.neg()).signature();
        assert_eq!((s.pos, s.neg, s.zero), (3, 3, 0));
    }

    #[test]
    fn preimage_and_image() {
        let m = QMat::from_i64(2, 3, &[1, 0, 0, 0, 1, 0]);
        let line = Subspace::span(2, &[unit(2, 0)]).unwrap();
        let pre = line.preimage(&m);
        assert_eq!(pre, Subspace::span(3, &[unit(3, 0), unit(3, 2)]).unwrap());
        assert_eq!(pre.image(&m), line);
    }
}
