//! Floating-point matrix-group layer.
//!
//! Points of a product of matrix groups are tuples of matrices. A tangent
//! vector at `g` is stored through right translation, as the Lie algebra
//! element `u` with vector `u g`. Differentials of group maps are computed
//! by forward-mode jets; exterior derivatives use central differences along
//! the flows `g -> exp(t u) g` of right-invariant vector fields, whose
//! brackets are `[u, v] = v u - u v`.

use crate::exactla::{q, qf, to_f64, QForm, QMat, Subspace, Q};
use crate::qlie::{self, MatrixLieAlgebra};
use crate::relations::{self, FiberedDiracPair};
use nalgebra::{DMatrix, DVector};
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub type Mat = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrpError {
    #[error("singular base matrix")]
    Singular,
    #[error("unknown group chart `{0}`")]
    UnknownChart(String),
    #[error("finite-difference step {0} underflows")]
    StepUnderflow(f64),
    #[error("{0} is not available for chart `{1}`")]
    Unsupported(&'static str, String),
    #[error("transversality fails at sample {0}")]
    Transversality(usize),
}

/// One verified identity over a set of sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub points: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl CheckRecord {
    /// Record from residuals at sample points; the witness names the worst sample.
    pub fn from_residuals(check: &str, residuals: &[f64], tolerance: f64) -> Self {
        let (worst, max) = residuals
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |acc, (i, &r)| if !(r <= acc.1) { (i, r) } else { acc });
        let pass = residuals.iter().all(|r| r.is_finite() && *r < tolerance);
        let max = if max.is_finite() { max } else { f64::MAX };
        let witness = (!pass).then(|| format!("sample {worst} has residual {max:.3e}"));
        CheckRecord { check: check.to_string(), points: residuals.len(), max_residual: max, tolerance, pass, witness }
    }

    /// Record of an exact (zero-tolerance) property.
    pub fn exact(check: &str, points: usize, failure: Option<String>) -> Self {
        CheckRecord {
            check: check.to_string(),
            points,
            max_residual: if failure.is_some() { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: failure.is_none(),
            witness: failure,
        }
    }
}

/// Sampling and tolerance settings shared by the suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub fd_tol: f64,
    pub fd_step: f64,
}

pub const DEFAULT_SEED: u64 = 0x5EED;

impl Default for Settings {
    fn default() -> Self {
        Settings { seed: DEFAULT_SEED, samples: 16, tol: 1e-9, fd_tol: 1e-6, fd_step: 1e-5 }
    }
}

impl Settings {
    /// Deterministic generator for the check with the given index.
    pub fn rng(&self, check: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ check.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// A matrix group with the exact basis of its Lie algebra and an invariant trace form.
#[derive(Clone, Debug)]
pub struct MatrixGroupChart {
    pub name: String,
    pub size: usize,
    pub exact: MatrixLieAlgebra,
    pub trace_scale: Q,
    pub basis: Vec<Mat>,
    pub gram: Mat,
    coord_solve: Mat,
}

pub const CHART_NAMES: &[&str] = &["sl2", "su2", "gl2", "sl3", "sl2c", "torus2"];

impl MatrixGroupChart {
    pub fn new(name: &str, exact: MatrixLieAlgebra, trace_scale: Q) -> Self {
        let size = exact.basis[0].rows;
        let basis: Vec<Mat> = exact.basis.iter().map(QMat::to_f64).collect();
        let gram = exact.trace_gram(&trace_scale).to_f64();
        let flat = Mat::from_fn(size * size, basis.len(), |r, c| basis[c][(r / size, r % size)]);
        let coord_solve = (flat.transpose() * &flat).try_inverse().expect("independent basis") * flat.transpose();
        MatrixGroupChart { name: name.to_string(), size, exact, trace_scale, basis, gram, coord_solve }
    }

    pub fn catalog(name: &str) -> Result<Self, GrpError> {
        let m = match name {
            "sl2" => qlie::sl2_matrix(),
            "su2" => qlie::su2_matrix(),
            "gl2" => qlie::gl2_matrix(),
            "sl3" => qlie::sl3_matrix(),
            "sl2c" => qlie::sl2c_matrix(),
            "torus2" => {
                let d = |i: usize| {
                    let mut m = QMat::zeros(2, 2);
                    m[(i, i)] = Q::one();
                    m
                };
                MatrixLieAlgebra::new(vec![d(0), d(1)]).expect("diagonal basis")
            }
            _ => return Err(GrpError::UnknownChart(name.to_string())),
        };
        Ok(Self::new(name, m, qlie::trace_scale(name)))
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn scale(&self) -> f64 {
        to_f64(&self.trace_scale)
    }

    pub fn pair(&self, x: &Mat, y: &Mat) -> f64 {
        self.scale() * (x * y).trace()
    }

    pub fn bracket(x: &Mat, y: &Mat) -> Mat {
        y * x - x * y
    }

    pub fn coords(&self, x: &Mat) -> DVector<f64> {
        let flat = DVector::from_fn(self.size * self.size, |r, _| x[(r / self.size, r % self.size)]);
        &self.coord_solve * flat
    }

    pub fn from_coords(&self, c: &[f64]) -> Mat {
        self.basis.iter().zip(c).fold(Mat::zeros(self.size, self.size), |acc, (b, x)| acc + b * *x)
    }

    pub fn identity(&self) -> Mat {
        Mat::identity(self.size, self.size)
    }

    /// Random algebra element with coordinates in `[-1, 1]`.
    pub fn random_vec<R: Rng>(&self, rng: &mut R) -> Mat {
        let c: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        self.from_coords(&c)
    }

    /// Product of exponentials of two random algebra elements.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Mat {
        self.random_vec(rng).exp() * self.random_vec(rng).exp()
    }

    /// Columns are the coordinates of `Ad_g e_i`.
    pub fn ad_matrix(&self, g: &Mat) -> Result<Mat, GrpError> {
        let gi = g.clone().try_inverse().ok_or(GrpError::Singular)?;
        let cols: Vec<DVector<f64>> = self.basis.iter().map(|b| self.coords(&(g * b * &gi))).collect();
        Ok(Mat::from_columns(&cols))
    }
}

/// A tangent vector `u g` at `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVec {
    pub base: Mat,
    pub u: Mat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Maurer-Cartan forms: `theta^r(u g) = u`, `theta^l(u g) = g^-1 u g`.
pub fn mc_eval(side: Side, v: &TangentVec) -> Result<Mat, GrpError> {
    match side {
        Side::Right => Ok(v.u.clone()),
        Side::Left => {
            let gi = v.base.clone().try_inverse().ok_or(GrpError::Singular)?;
            Ok(&gi * &v.u * &v.base)
        }
    }
}

/// First-order jet `(g, V)` with `V` a tangent matrix at `g`.
#[derive(Clone, Debug)]
pub struct Jet {
    pub val: Mat,
    pub tan: Mat,
}

impl Jet {
    pub fn along(g: &Mat, u: &Mat) -> Jet {
        Jet { val: g.clone(), tan: u * g }
    }

    pub fn constant(g: &Mat) -> Jet {
        Jet { val: g.clone(), tan: Mat::zeros(g.nrows(), g.ncols()) }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        Jet { val: &self.val * &o.val, tan: &self.tan * &o.val + &self.val * &o.tan }
    }

    pub fn inv(&self) -> Jet {
        let gi = self.val.clone().try_inverse().expect("group element is invertible");
        Jet { tan: -(&gi * &self.tan * &gi), val: gi }
    }

    /// The right-trivialized tangent `V g^-1`.
    pub fn right(&self) -> Mat {
        &self.tan * self.val.clone().try_inverse().expect("group element is invertible")
    }
}

/// Map between products of groups, acting on jets.
pub type GroupMap = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

type FormFn = Arc<dyn Fn(&[Mat], &[Vec<Mat>]) -> (f64, f64) + Send + Sync>;

/// A differential form on a product of `factors` groups, evaluated on right-trivialized vectors.
///
/// Evaluation also returns a magnitude, the sum of the absolute values of the
/// primitive forms entering a sum, which is the scale of its rounding error.
#[derive(Clone)]
pub struct Form {
    pub degree: usize,
    pub factors: usize,
    f: FormFn,
}

impl Form {
    pub fn new(degree: usize, factors: usize, f: impl Fn(&[Mat], &[Vec<Mat>]) -> f64 + Send + Sync + 'static) -> Self {
        Form {
            degree,
            factors,
            f: Arc::new(move |p, v| {
                let x = f(p, v);
                (x, x.abs())
            }),
        }
    }

    pub fn eval(&self, pt: &[Mat], vecs: &[Vec<Mat>]) -> f64 {
        (self.f)(pt, vecs).0
    }

    /// Value together with its magnitude.
    pub fn eval_with_magnitude(&self, pt: &[Mat], vecs: &[Vec<Mat>]) -> (f64, f64) {
        (self.f)(pt, vecs)
    }

    pub fn add(&self, o: &Form) -> Form {
        let (a, b) = (self.f.clone(), o.f.clone());
        Form {
            degree: self.degree,
            factors: self.factors,
            f: Arc::new(move |p, v| {
                let (x, mx) = a(p, v);
                let (y, my) = b(p, v);
                (x + y, mx + my)
            }),
        }
    }

    pub fn scale(&self, c: f64) -> Form {
        let a = self.f.clone();
        Form {
            degree: self.degree,
            factors: self.factors,
            f: Arc::new(move |p, v| {
                let (x, m) = a(p, v);
                (c * x, c.abs() * m)
            }),
        }
    }

    pub fn sub(&self, o: &Form) -> Form {
        self.add(&o.scale(-1.0))
    }

    /// `map^* self` for a map from a product of `factors` groups.
    pub fn pullback(&self, factors: usize, map: GroupMap) -> Form {
        let f = self.f.clone();
        let pulled = move |pt: &[Mat], vecs: &[Vec<Mat>]| {
            let base = map(&pt.iter().map(Jet::constant).collect::<Vec<_>>());
            let out_pt: Vec<Mat> = base.iter().map(|j| j.val.clone()).collect();
            let out_vecs: Vec<Vec<Mat>> = vecs
                .iter()
                .map(|v| {
                    let jets: Vec<Jet> = pt.iter().zip(v).map(|(g, u)| Jet::along(g, u)).collect();
                    map(&jets).iter().map(Jet::right).collect()
                })
                .collect();
            f(&out_pt, &out_vecs)
        };
        Form { degree: self.degree, factors, f: Arc::new(pulled) }
    }
}

/// Map picking the listed factors.
pub fn select(idx: &[usize]) -> GroupMap {
    let idx = idx.to_vec();
    Arc::new(move |j: &[Jet]| idx.iter().map(|&i| j[i].clone()).collect())
}

/// `Omega = -1/2 <pr1^* theta^l, pr2^* theta^r>` on `K x K`, scaled by `sign`.
pub fn polwie_omega(chart: &MatrixGroupChart) -> Form {
    let c = chart.clone();
    Form::new(2, 2, move |pt, v| {
        let gi = pt[0].clone().try_inverse().expect("invertible");
        let l = |x: &Mat| &gi * x * &pt[0];
        -0.5 * (c.pair(&l(&v[0][0]), &v[1][1]) - c.pair(&l(&v[1][0]), &v[0][1]))
    })
}

/// `Theta = -1/12 <theta^l, [theta^l, theta^l]>`, evaluated as `-1/2 <theta^l X, [theta^l Y, theta^l Z]>`.
pub fn polwie_theta(chart: &MatrixGroupChart) -> Form {
    let c = chart.clone();
    Form::new(3, 1, move |pt, v| {
        let gi = pt[0].clone().try_inverse().expect("invertible");
        let l = |x: &Mat| &gi * x * &pt[0];
        -0.5 * c.pair(&l(&v[0][0]), &MatrixGroupChart::bracket(&l(&v[1][0]), &l(&v[2][0])))
    })
}

/// `Omega-hat = (id, inv)^* Omega` on `K`, where `K` is a product of `blocks` groups.
pub fn omega_hat(omega: &Form, blocks: usize) -> Form {
    omega.pullback(
        blocks,
        Arc::new(|j: &[Jet]| j.iter().cloned().chain(j.iter().map(Jet::inv)).collect()),
    )
}

/// Sum of copies of a form on a product of groups, one per factor block with the given signs.
///
/// `form` lives on `per` factors. The result lives on `per * signs.len()` factors laid out as
/// consecutive blocks where block `b` of the `i`-th slot is factor `i * signs.len() + b`.
pub fn signed_sum(form: &Form, per: usize, signs: &[f64]) -> Form {
    let nb = signs.len();
    let mut total: Option<Form> = None;
    for (b, &s) in signs.iter().enumerate() {
        let idx: Vec<usize> = (0..per).map(|i| i * nb + b).collect();
        let term = form.pullback(per * nb, select(&idx)).scale(s);
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term),
        });
    }
    total.expect("at least one block")
}

/// Face `d_i: K^k -> K^{k-1}` of the nerve of a group.
pub fn nerve_face(k: usize, i: usize) -> GroupMap {
    Arc::new(move |j: &[Jet]| {
        let mut out = Vec::with_capacity(k - 1);
        for (p, jet) in j.iter().enumerate() {
            if i == 0 && p == 0 || i == k && p == k - 1 {
                continue;
            }
            if i > 0 && i < k && p == i {
                let last = out.pop().expect("previous factor");
                out.push(Jet::mul(&last, jet));
                continue;
            }
            out.push(jet.clone());
        }
        out
    })
}

/// `delta F = sum_i (-1)^i d_i^* F` on the nerve of a group, with `F` on `K^k`.
pub fn nerve_delta(form: &Form, k: usize) -> Form {
    let mut total = form.pullback(k + 1, nerve_face(k + 1, 0));
    for i in 1..=k + 1 {
        let term = form.pullback(k + 1, nerve_face(k + 1, i));
        total = if i % 2 == 0 { total.add(&term) } else { total.sub(&term) };
    }
    total
}

fn flow(pt: &[Mat], u: &[Mat], t: f64) -> Vec<Mat> {
    pt.iter().zip(u).map(|(g, x)| (x * t).exp() * g).collect()
}

fn fd_ext_d_once(form: &Form, pt: &[Mat], vecs: &[Vec<Mat>], h: f64) -> (f64, f64) {
    let k = form.degree;
    let (mut total, mut mag) = (0.0, 0.0);
    for i in 0..=k {
        let rest: Vec<Vec<Mat>> = vecs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
        let (plus, mp) = form.eval_with_magnitude(&flow(pt, &vecs[i], h), &rest);
        let (minus, mm) = form.eval_with_magnitude(&flow(pt, &vecs[i], -h), &rest);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * (plus - minus) / (2.0 * h);
        mag += (mp + mm) / 2.0;
    }
    for i in 0..=k {
        for j in i + 1..=k {
            let br: Vec<Mat> = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| MatrixGroupChart::bracket(a, b)).collect();
            let mut args = vec![br];
            args.extend(vecs.iter().enumerate().filter(|&(l, _)| l != i && l != j).map(|(_, v)| v.clone()));
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let (x, m) = form.eval_with_magnitude(pt, &args);
            total += sign * x;
            mag += m;
        }
    }
    (total, mag)
}

/// Central-difference exterior derivative `dF(V_0, ..., V_k)` along right-invariant fields,
/// optionally with one Richardson extrapolation step.
pub fn fd_ext_d(form: &Form, pt: &[Mat], vecs: &[Vec<Mat>], step: f64, richardson: bool) -> Result<f64, GrpError> {
    fd_ext_d_with_magnitude(form, pt, vecs, step, richardson).map(|(d, _)| d)
}

/// [`fd_ext_d`] together with the magnitude of the values it combines.
pub fn fd_ext_d_with_magnitude(form: &Form, pt: &[Mat], vecs: &[Vec<Mat>], step: f64, richardson: bool) -> Result<(f64, f64), GrpError> {
    if !(step > 1e-12) {
        return Err(GrpError::StepUnderflow(step));
    }
    let (d1, m1) = fd_ext_d_once(form, pt, vecs, step);
    if !richardson {
        return Ok((d1, m1));
    }
    let (d2, m2) = fd_ext_d_once(form, pt, vecs, step / 2.0);
    Ok(((4.0 * d2 - d1) / 3.0, m1.max(m2)))
}

/// Relative residual `|x| / max(1, magnitude)`.
pub fn relative(x: f64, magnitude: f64) -> f64 {
    x.abs() / magnitude.max(1.0)
}

fn random_tuple<R: Rng>(charts: &[&MatrixGroupChart], rng: &mut R) -> Vec<Mat> {
    charts.iter().map(|c| c.random_vec(rng)).collect()
}

fn random_point<R: Rng>(charts: &[&MatrixGroupChart], rng: &mut R) -> Vec<Mat> {
    charts.iter().map(|c| c.sample(rng)).collect()
}

/// Relative residuals of a derivative-free identity `F = 0` at random points and vectors.
fn pointwise_residuals(form: &Form, chart: &MatrixGroupChart, settings: &Settings, check: u64, n: usize) -> Vec<f64> {
    let mut rng = settings.rng(check);
    let charts = vec![chart; form.factors];
    (0..n)
        .map(|_| {
            let pt = random_point(&charts, &mut rng);
            let vecs: Vec<Vec<Mat>> = (0..form.degree).map(|_| random_tuple(&charts, &mut rng)).collect();
            let (x, m) = form.eval_with_magnitude(&pt, &vecs);
            relative(x, m)
        })
        .collect()
}

/// Relative residuals of `dF = G` by Richardson-extrapolated central differences.
fn fd_residuals(f: &Form, g: Option<&Form>, chart: &MatrixGroupChart, settings: &Settings, check: u64, n: usize) -> Result<Vec<f64>, GrpError> {
    let mut rng = settings.rng(check);
    let charts = vec![chart; f.factors];
    (0..n)
        .map(|_| {
            let pt = random_point(&charts, &mut rng);
            let vecs: Vec<Vec<Mat>> = (0..=f.degree).map(|_| random_tuple(&charts, &mut rng)).collect();
            let (d, md) = fd_ext_d_with_magnitude(f, &pt, &vecs, settings.fd_step, true)?;
            let (rhs, mr) = g.map(|g| g.eval_with_magnitude(&pt, &vecs)).unwrap_or((0.0, 0.0));
            Ok(relative(d - rhs, md + mr))
        })
        .collect()
}

/// Alternation under adjacent swaps and linearity in every slot at random arguments, relative to the magnitude.
fn alternating_multilinear_residuals(form: &Form, chart: &MatrixGroupChart, settings: &Settings, check: u64, n: usize) -> Vec<f64> {
    let mut rng = settings.rng(check);
    let charts = vec![chart; form.factors];
    (0..n)
        .map(|_| {
            let pt = random_point(&charts, &mut rng);
            let vecs: Vec<Vec<Mat>> = (0..form.degree).map(|_| random_tuple(&charts, &mut rng)).collect();
            let (base, mag) = form.eval_with_magnitude(&pt, &vecs);
            let mut worst = 0.0_f64;
            for i in 0..form.degree.saturating_sub(1) {
                let mut swapped = vecs.clone();
                swapped.swap(i, i + 1);
                let (x, m) = form.eval_with_magnitude(&pt, &swapped);
                worst = worst.max(relative(base + x, mag + m));
            }
            let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            for i in 0..form.degree {
                let other = random_tuple(&charts, &mut rng);
                let mut combo = vecs.clone();
                combo[i] = vecs[i].iter().zip(&other).map(|(a, b)| a * alpha + b * beta).collect();
                let mut alt = vecs.clone();
                alt[i] = other;
                let (c, mc) = form.eval_with_magnitude(&pt, &combo);
                let (o, mo) = form.eval_with_magnitude(&pt, &alt);
                worst = worst.max(relative(c - alpha * base - beta * o, mc + alpha.abs() * mag + beta.abs() * mo));
            }
            worst
        })
        .collect()
}

/// Pairing recovered from `Omega` at the units.
pub fn polwie_pairing(chart: &MatrixGroupChart) -> Mat {
    let omega = polwie_omega(chart);
    let id = chart.identity();
    crate::shifted::pairing_from_omega2_f64(chart.dim(), |x1, x2, y1, y2| {
        let v = vec![vec![chart.from_coords(x1), chart.from_coords(x2)], vec![chart.from_coords(y1), chart.from_coords(y2)]];
        omega.eval(&[id.clone(), id.clone()], &v)
    })
}

/// `Omega` and `Theta` on `K`: `delta Omega = 0`, `d Omega + delta Theta = 0`, `d Theta = 0`.
pub fn polwie_suite(chart: &MatrixGroupChart, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let omega = polwie_omega(chart);
    let theta = polwie_theta(chart);
    let n = settings.samples;
    let gram_res = (polwie_pairing(chart) - &chart.gram).abs().max();
    let mut out = vec![CheckRecord::from_residuals("polwie.pairing_at_units", &[gram_res], settings.tol)];
    out.push(CheckRecord::from_residuals("polwie.omega_alternating", &alternating_multilinear_residuals(&omega, chart, settings, 1, n), settings.tol));
    out.push(CheckRecord::from_residuals("polwie.theta_alternating", &alternating_multilinear_residuals(&theta, chart, settings, 5, n), settings.tol));
    out.push(CheckRecord::from_residuals("polwie.delta_omega", &pointwise_residuals(&nerve_delta(&omega, 2), chart, settings, 2, n), settings.tol));
    let dtheta = nerve_delta(&theta, 1).scale(-1.0);
    out.push(CheckRecord::from_residuals("polwie.d_omega_plus_delta_theta", &fd_residuals(&omega, Some(&dtheta), chart, settings, 3, n)?, settings.fd_tol));
    out.push(CheckRecord::from_residuals("polwie.d_theta", &fd_residuals(&theta, None, chart, settings, 4, n)?, settings.fd_tol));
    Ok(out)
}

/// `omega_AMM` on arrows `(k, gamma)` of `K x K => K`, target `k gamma k^-1`.
pub fn amm_omega(chart: &MatrixGroupChart) -> Form {
    let omega = polwie_omega(chart);
    let twisted = omega.pullback(2, Arc::new(|j: &[Jet]| vec![j[0].mul(&j[1]).mul(&j[0].inv()), j[0].clone()]));
    twisted.sub(&omega)
}

fn amm_maps() -> (GroupMap, GroupMap, GroupMap, GroupMap, GroupMap) {
    let s: GroupMap = Arc::new(|j: &[Jet]| vec![j[1].clone()]);
    let t: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].mul(&j[1]).mul(&j[0].inv())]);
    // Composable pairs parametrized by (k1, k2, gamma): h1 = (k1, k2 gamma k2^-1), h2 = (k2, gamma).
    let pr1: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].clone(), j[1].mul(&j[2]).mul(&j[1].inv())]);
    let pr2: GroupMap = Arc::new(|j: &[Jet]| vec![j[1].clone(), j[2].clone()]);
    let m: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].mul(&j[1]), j[2].clone()]);
    (s, t, pr1, pr2, m)
}

/// Float rank with singular values above `1e-8` times the largest, and the smallest singular value.
pub fn float_rank(m: &Mat) -> (usize, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0, 0.0);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-8 * max.max(f64::MIN_POSITIVE)).count();
    (rank, sv.min())
}

/// Matrix of a 2-form on the listed tangent vectors.
fn form_matrix(form: &Form, pt: &[Mat], basis: &[Vec<Mat>]) -> Mat {
    Mat::from_fn(basis.len(), basis.len(), |i, j| form.eval(pt, &[basis[i].clone(), basis[j].clone()]))
}

/// Matrix of the differential of `map` at `pt` on the listed vectors, in output coordinates.
fn map_matrix(map: &GroupMap, pt: &[Mat], basis: &[Vec<Mat>], out: &[&MatrixGroupChart]) -> Mat {
    let cols: Vec<DVector<f64>> = basis
        .iter()
        .map(|v| {
            let jets: Vec<Jet> = pt.iter().zip(v).map(|(g, u)| Jet::along(g, u)).collect();
            let img = map(&jets);
            let parts: Vec<f64> = img.iter().zip(out).flat_map(|(j, c)| c.coords(&j.right()).iter().copied().collect::<Vec<_>>()).collect();
            DVector::from_vec(parts)
        })
        .collect();
    Mat::from_columns(&cols)
}

/// Basis of the tangent space of a product of `k` copies of the chart.
fn product_basis(chart: &MatrixGroupChart, k: usize) -> Vec<Vec<Mat>> {
    let z = Mat::zeros(chart.size, chart.size);
    let mut out = Vec::new();
    for f in 0..k {
        for b in &chart.basis {
            let mut v = vec![z.clone(); k];
            v[f] = b.clone();
            out.push(v);
        }
    }
    out
}

/// AMM groupoid: multiplicativity, `d omega = s^* eta - t^* eta`, unit normalization and nondegeneracy.
pub fn amm_suite(chart: &MatrixGroupChart, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let n = settings.samples;
    let omega = amm_omega(chart);
    let eta = polwie_theta(chart);
    let (s, t, pr1, pr2, m) = amm_maps();
    let delta = omega.pullback(3, pr1).add(&omega.pullback(3, pr2)).sub(&omega.pullback(3, m));
    let mut out = vec![CheckRecord::from_residuals("amm.delta_omega", &pointwise_residuals(&delta, chart, settings, 11, n), settings.tol)];
    let rhs = eta.pullback(2, s.clone()).sub(&eta.pullback(2, t.clone()));
    out.push(CheckRecord::from_residuals("amm.d_omega", &fd_residuals(&omega, Some(&rhs), chart, settings, 12, n)?, settings.fd_tol));
    let unit: GroupMap = Arc::new(|j: &[Jet]| vec![Jet::constant(&Mat::identity(j[0].val.nrows(), j[0].val.nrows())), j[0].clone()]);
    let eps = omega.pullback(1, unit);
    out.push(CheckRecord::from_residuals("amm.omega_alternating", &alternating_multilinear_residuals(&omega, chart, settings, 15, n), settings.tol));
    out.push(CheckRecord::from_residuals("amm.unit_normalization", &pointwise_residuals(&eps, chart, settings, 13, n), settings.tol));
    let mut rng = settings.rng(14);
    let d = chart.dim();
    let basis = product_basis(chart, 2);
    let mut ranks = Vec::new();
    for _ in 0..n {
        let pt = vec![chart.identity(), chart.sample(&mut rng)];
        let w = form_matrix(&omega, &pt, &basis);
        let ts = map_matrix(&s, &pt, &basis, &[chart]);
        let tt = map_matrix(&t, &pt, &basis, &[chart]);
        let stacked = Mat::from_rows(&w.row_iter().chain(ts.row_iter()).chain(tt.row_iter()).collect::<Vec<_>>());
        let (rank, smin) = float_rank(&stacked);
        ranks.push(if rank == 2 * d { 0.0 } else { 1.0 + smin });
    }
    out.push(CheckRecord::from_residuals("amm.nondegenerate_at_units", &ranks, 0.5));
    Ok(out)
}

/// Orthonormal basis of the column span, with the float rank rule.
fn orth(m: &Mat) -> Mat {
    if m.ncols() == 0 {
        return Mat::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left vectors");
    let (rank, _) = float_rank(m);
    u.columns(0, rank).into_owned()
}

/// Null space of `m` (columns), from the eigen-decomposition of `m^T m`.
fn null_space(m: &Mat) -> Mat {
    let n = m.ncols();
    let (rank, _) = float_rank(m);
    let eig = (m.transpose() * m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite"));
    let cols: Vec<DVector<f64>> = idx[..n - rank].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    if cols.is_empty() {
        Mat::zeros(n, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Distance between the column spans of `a` and `b`; infinite when the dimensions differ.
pub fn span_distance(a: &Mat, b: &Mat) -> f64 {
    let (qa, qb) = (orth(a), orth(b));
    if qa.ncols() != qb.ncols() {
        return f64::INFINITY;
    }
    let pa = &qa * qa.transpose();
    (&qb - &pa * &qb).abs().max()
}

/// Float fibre product of `L1 in E1 + k` with `L2 in k` (columns), projected to `E1`.
fn float_reduce(l1: &Mat, e_dim: usize, l2: &Mat) -> Mat {
    let k = l1.nrows() - e_dim;
    let k1 = l1.rows(e_dim, k).into_owned();
    let mut m = Mat::zeros(k, l1.ncols() + l2.ncols());
    m.columns_mut(0, l1.ncols()).copy_from(&k1);
    m.columns_mut(l1.ncols(), l2.ncols()).copy_from(&(-l2));
    let ker = null_space(&m);
    l1.rows(0, e_dim).into_owned() * ker.rows(0, l1.ncols())
}

/// Fibre of the groupoid of arrows at `g` from `Omega`, as columns `(x, xi, u, v)` for basis pairs `(u, v)`.
fn arrows_fiber_f64(chart: &MatrixGroupChart, g: &Mat) -> Mat {
    let d = chart.dim();
    let omega = polwie_omega(chart);
    let (id, z) = (chart.identity(), Mat::zeros(chart.size, chart.size));
    let mut cols = Vec::new();
    for j in 0..2 * d {
        let (u, v) = if j < d { (chart.basis[j].clone(), z.clone()) } else { (z.clone(), chart.basis[j - d].clone()) };
        let gi = g.clone().try_inverse().expect("invertible");
        let x = &u - g * &v * &gi;
        let mut col = chart.coords(&x).iter().copied().collect::<Vec<_>>();
        for e in &chart.basis {
            let a = omega.eval(&[id.clone(), g.clone()], &[vec![z.clone(), e.clone()], vec![u.clone(), z.clone()]]);
            let b = omega.eval(&[g.clone(), id.clone()], &[vec![e.clone(), z.clone()], vec![z.clone(), v.clone()]]);
            col.push(a - b);
        }
        col.extend(chart.coords(&u).iter());
        col.extend(chart.coords(&v).iter());
        cols.push(DVector::from_vec(col));
    }
    Mat::from_columns(&cols)
}

/// Image under the Cartan splitting of the pairs `(u, v)` given as columns of `pairs` (`2d x r`).
fn cartan_display_f64(chart: &MatrixGroupChart, g: &Mat, pairs: &Mat) -> Mat {
    let d = chart.dim();
    let ad = chart.ad_matrix(g).expect("invertible");
    let cols: Vec<DVector<f64>> = pairs
        .column_iter()
        .map(|c| {
            let (u, v) = (c.rows(0, d).into_owned(), c.rows(d, d).into_owned());
            let adv = &ad * &v;
            let x = &u - &adv;
            let xi = (&chart.gram * (&u + &adv)) * 0.5;
            DVector::from_iterator(2 * d, x.iter().chain(xi.iter()).copied())
        })
        .collect();
    Mat::from_columns(&cols)
}

fn subspace_f64(s: &Subspace) -> Mat {
    let b = s.basis_matrix();
    if b.cols == 0 {
        return Mat::zeros(s.ambient(), 0);
    }
    b.to_f64()
}

/// Exact `Ad_g` in coordinates.
pub fn ad_exact(alg: &MatrixLieAlgebra, g: &QMat) -> QMat {
    let gi = g.inverse().expect("invertible");
    let cols: Vec<Vec<Q>> = alg.basis.iter().map(|b| alg.coords(&g.mul(b).mul(&gi)).expect("Ad preserves the algebra")).collect();
    QMat::from_cols(alg.dim(), &cols)
}

/// Random element of `SL(2, Q)` as a product of elementary matrices.
pub fn rational_sl2<R: Rng>(rng: &mut R) -> QMat {
    let r = |rng: &mut R| qf(rng.gen_range(-4..=4), rng.gen_range(1..=3));
    let up = QMat::from_rows(2, &[vec![q(1), r(rng)], vec![q(0), q(1)]]);
    let lo = QMat::from_rows(2, &[vec![q(1), q(0)], vec![r(rng), q(1)]]);
    let t = Q::new(rng.gen_range(1..=3).into(), rng.gen_range(1..=3).into());
    let diag = QMat::from_rows(2, &[vec![t.clone(), q(0)], vec![q(0), t.recip()]]);
    up.mul(&lo).mul(&diag)
}

fn exact_pair(gram: &QMat, a: &[Q], b: &[Q]) -> Q {
    crate::exactla::dot(a, &gram.mul_vec(b))
}

/// Exact `Omega` at `(a, b)` on coordinate vectors, given `Ad_{a^-1}`.
fn omega_exact(gram: &QMat, ad_ainv: &QMat, x1: &[Q], x2: &[Q], y1: &[Q], y2: &[Q]) -> Q {
    -(exact_pair(gram, &ad_ainv.mul_vec(x1), y2) - exact_pair(gram, &ad_ainv.mul_vec(y1), x2)) * qf(1, 2)
}

/// Exact fibre of the groupoid of arrows at `g` inside `T G + T*G + gbar + g`.
pub fn arrows_fiber_exact(alg: &MatrixLieAlgebra, gram: &QMat, g: &QMat) -> Subspace {
    let d = alg.dim();
    let ad = ad_exact(alg, g);
    let adinv = ad.inverse().expect("invertible");
    let id = QMat::identity(d);
    let z = vec![Q::zero(); d];
    let mut vecs = Vec::new();
    for j in 0..2 * d {
        let (u, v) = if j < d { (crate::exactla::unit(d, j), z.clone()) } else { (z.clone(), crate::exactla::unit(d, j - d)) };
        let x = crate::exactla::vsub(&u, &ad.mul_vec(&v));
        let xi: Vec<Q> = (0..d)
            .map(|i| {
                let e = crate::exactla::unit(d, i);
                omega_exact(gram, &id, &z, &e, &u, &z) - omega_exact(gram, &adinv, &e, &z, &z, &v)
            })
            .collect();
        vecs.push(crate::exactla::vcat(&[&x, &xi, &u, &v]));
    }
    Subspace::span(4 * d, &vecs).expect("ambient 4d")
}

/// Exact image of `pairs` (inside `g + gbar`) under the Cartan splitting at `g`.
pub fn cartan_display_exact(alg: &MatrixLieAlgebra, gram: &QMat, g: &QMat, pairs: &Subspace) -> Subspace {
    let d = alg.dim();
    let ad = ad_exact(alg, g);
    let vecs: Vec<Vec<Q>> = pairs
        .basis()
        .iter()
        .map(|p| {
            let (u, v) = (&p[..d], &p[d..]);
            let adv = ad.mul_vec(v);
            let x = crate::exactla::vsub(u, &adv);
            let xi = crate::exactla::vscale(&gram.mul_vec(&crate::exactla::vadd(u, &adv)), &qf(1, 2));
            crate::exactla::vcat(&[&x, &xi])
        })
        .collect();
    Subspace::span(2 * d, &vecs).expect("ambient 2d")
}

/// `reduce` of the arrows fibre against `target` (inside `g + gbar`), exactly.
pub fn reduce_arrows_exact(alg: &MatrixLieAlgebra, gram: &QMat, g: &QMat, target: &Subspace) -> Result<Subspace, relations::RelError> {
    let d = alg.dim();
    let gf = QForm::new(gram.clone()).expect("symmetric");
    let pair = FiberedDiracPair {
        q1: QForm::hyperbolic(d),
        q2: QForm::diagonal(&[]),
        qk: gf.neg().direct_sum(&gf),
        l1: arrows_fiber_exact(alg, gram, g),
        l2: target.clone(),
    };
    Ok(relations::reduce(&pair)?.l)
}

/// Cartan-Dirac and Gauss-Dirac structures as fibred products with the groupoid of arrows.
///
/// `rational` exact points in `SL(2, Q)` (for `sl2`) and `settings.samples` float points.
pub fn gauss_cartan_fibred(chart: &MatrixGroupChart, rational: usize, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let d = chart.dim();
    let gram = chart.exact.trace_gram(&chart.trace_scale);
    let gauss = match chart.name.as_str() {
        "sl2" => Some(qlie::gauss_s_sl2()),
        "sl3" => Some(qlie::gauss_s_sl3()),
        _ => None,
    };
    let mut targets = vec![("cartan_dirac", qlie::diagonal(d))];
    if let Some(s) = gauss {
        targets.push(("gauss_dirac", s));
    }
    let mut out = Vec::new();
    if chart.name == "sl2" && rational > 0 {
        for (name, target) in &targets {
            let mut rng = settings.rng(21);
            let mut failure = None;
            for i in 0..rational {
                let g = if i == 0 { QMat::identity(2) } else { rational_sl2(&mut rng) };
                let reduced = reduce_arrows_exact(&chart.exact, &gram, &g, target).map_err(|_| GrpError::Transversality(i))?;
                let display = cartan_display_exact(&chart.exact, &gram, &g, target);
                if reduced != display || display.dim() != d {
                    failure = Some(format!("rational point {i}: {:?}", g));
                    break;
                }
            }
            out.push(CheckRecord::exact(&format!("gauss_cartan.{name}_exact"), rational, failure));
        }
    }
    for (name, target) in &targets {
        let mut rng = settings.rng(22);
        let t = subspace_f64(target);
        let residuals: Vec<f64> = (0..settings.samples)
            .map(|_| {
                let g = chart.sample(&mut rng);
                let reduced = float_reduce(&arrows_fiber_f64(chart, &g), 2 * d, &t);
                let display = cartan_display_f64(chart, &g, &t);
                span_distance(&reduced, &display)
            })
            .collect();
        out.push(CheckRecord::from_residuals(&format!("gauss_cartan.{name}_float"), &residuals, settings.tol));
    }
    Ok(out)
}

/// `sigma = (g1 gamma g2^-1, g2)^* Omega - (g1, gamma)^* Omega` on arrows `((g1, g2), gamma)`.
pub fn arrows_sigma(chart: &MatrixGroupChart) -> Form {
    let omega = polwie_omega(chart);
    let a = omega.pullback(3, Arc::new(|j: &[Jet]| vec![j[0].mul(&j[2]).mul(&j[1].inv()), j[1].clone()]));
    let b = omega.pullback(3, select(&[0, 2]));
    a.sub(&b)
}

/// Groupoid of arrows `G^2 x G => G`: `delta sigma = Phi^* Omega`, `Phi^* Theta = s^* eta - t^* eta - d sigma`,
/// `i^* sigma = -sigma + Phi^* Omega-hat`, and lagrangian fibres of its Dirac structure.
pub fn arrow_groupoid_suite(chart: &MatrixGroupChart, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let n = settings.samples;
    let d = chart.dim();
    let sigma = arrows_sigma(chart);
    let omega = polwie_omega(chart);
    let theta = polwie_theta(chart);
    // Target K = Gbar x G: Omega_K on (K x K) laid out as (a1, a2, b1, b2).
    let omega_k = signed_sum(&omega, 2, &[-1.0, 1.0]);
    let theta_k = signed_sum(&theta, 1, &[-1.0, 1.0]);
    // Composable pairs (g1, g2, g1', g2', gamma): h1 = ((g1, g2), g1' gamma g2'^-1), h2 = ((g1', g2'), gamma).
    let pr1: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].clone(), j[1].clone(), j[2].mul(&j[4]).mul(&j[3].inv())]);
    let pr2: GroupMap = Arc::new(|j: &[Jet]| vec![j[2].clone(), j[3].clone(), j[4].clone()]);
    let m: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].mul(&j[2]), j[1].mul(&j[3]), j[4].clone()]);
    let phi2: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].clone(), j[1].clone(), j[2].clone(), j[3].clone()]);
    let delta = sigma.pullback(5, pr1).add(&sigma.pullback(5, pr2)).sub(&sigma.pullback(5, m));
    let lhs = delta.sub(&omega_k.pullback(5, phi2));
    let mut out = vec![CheckRecord::from_residuals("arrows.delta_sigma", &pointwise_residuals(&lhs, chart, settings, 31, n), settings.tol)];
    out.push(CheckRecord::from_residuals("arrows.sigma_alternating", &alternating_multilinear_residuals(&sigma, chart, settings, 35, n), settings.tol));
    let s: GroupMap = Arc::new(|j: &[Jet]| vec![j[2].clone()]);
    let t: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].mul(&j[2]).mul(&j[1].inv())]);
    let phi: GroupMap = select(&[0, 1]);
    let rhs = theta.pullback(3, s).sub(&theta.pullback(3, t)).sub(&theta_k.pullback(3, phi.clone()));
    out.push(CheckRecord::from_residuals("arrows.d_sigma", &fd_residuals(&sigma, Some(&rhs), chart, settings, 32, n)?, settings.fd_tol));
    let inv: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].inv(), j[1].inv(), j[0].mul(&j[2]).mul(&j[1].inv())]);
    let hat = omega_hat(&omega_k, 2);
    let inversion = sigma.pullback(3, inv).add(&sigma).sub(&hat.pullback(3, phi));
    out.push(CheckRecord::from_residuals("arrows.inverse_sigma", &pointwise_residuals(&inversion, chart, settings, 33, n), settings.tol));
    let gf = chart.gram.clone();
    let mut form = Mat::zeros(4 * d, 4 * d);
    for i in 0..d {
        form[(i, d + i)] = 1.0;
        form[(d + i, i)] = 1.0;
    }
    form.view_mut((2 * d, 2 * d), (d, d)).copy_from(&(-&gf));
    form.view_mut((3 * d, 3 * d), (d, d)).copy_from(&gf);
    let mut rng = settings.rng(34);
    let residuals: Vec<f64> = (0..n)
        .map(|_| {
            let g = chart.sample(&mut rng);
            let l = arrows_fiber_f64(chart, &g);
            let iso = (l.transpose() * &form * &l).abs().max();
            let (rank, _) = float_rank(&l);
            if rank == 2 * d {
                iso
            } else {
                f64::INFINITY
            }
        })
        .collect();
    out.push(CheckRecord::from_residuals("arrows.dirac_fiber_lagrangian", &residuals, settings.tol));
    Ok(out)
}

/// `sigma` of the `(G, 0)` moment map on `P(G) x G^2`, points `(a1, a2, g1, g2)`.
pub fn g0_sigma(chart: &MatrixGroupChart) -> Form {
    let omega = polwie_omega(chart);
    let t1 = omega.pullback(4, Arc::new(|j: &[Jet]| vec![j[0].clone(), j[0].inv().mul(&j[2]).mul(&j[1])]));
    let t2 = omega.pullback(4, select(&[2, 1]));
    let t3 = omega.pullback(4, select(&[0, 3]));
    let t4 = omega.pullback(4, Arc::new(|j: &[Jet]| vec![j[0].mul(&j[3]).mul(&j[1].inv()), j[1].clone()]));
    t1.sub(&t2).sub(&t3).add(&t4)
}

/// `Phi(a1, a2, g1, g2) = ((a1 g2 a2^-1, g1), (a1^-1 g1 a2, g2))` into `D^2`, `D = G x Gbar`.
pub fn g0_phi() -> GroupMap {
    Arc::new(|j: &[Jet]| {
        vec![
            j[0].mul(&j[3]).mul(&j[1].inv()),
            j[2].clone(),
            j[0].inv().mul(&j[2]).mul(&j[1]),
            j[3].clone(),
        ]
    })
}

/// `Psi((g1, g2), a) = (g1 a g2^-1, a, g1, g2)`.
pub fn g0_psi() -> GroupMap {
    Arc::new(|j: &[Jet]| vec![j[0].mul(&j[2]).mul(&j[1].inv()), j[2].clone(), j[0].clone(), j[1].clone()])
}

/// `lambda_sigma(X, (u1, u2))` evaluated on `y` at `a` (all right-trivialized, closed form).
pub fn g0_lambda_closed(chart: &MatrixGroupChart, a: &Mat, x: &Mat, u1: &Mat, u2: &Mat, y: &Mat) -> f64 {
    let ai = a.clone().try_inverse().expect("invertible");
    let l = |z: &Mat| &ai * z * a;
    -chart.pair(u2, &l(y)) + chart.pair(u1, y) - 0.5 * chart.pair(x, y) - 0.5 * chart.pair(&l(x), &l(y))
}

/// `varphi(X, (u1, u2)) = ((Ad_a u2 + x, u1), (-Ad_{a^-1} x + Ad_{a^-1} u1, u2))` (closed form).
pub fn g0_varphi_closed(a: &Mat, x: &Mat, u1: &Mat, u2: &Mat) -> [Mat; 4] {
    let ai = a.clone().try_inverse().expect("invertible");
    [a * u2 * &ai + x, u1.clone(), -(&ai * x * a) + &ai * u1 * a, u2.clone()]
}

/// Exact fibre of the Dirac structure of the `(G, 0)` moment map at `a`, inside `T G + T*G + d^2`.
pub fn g0_dirac_exact(alg: &MatrixLieAlgebra, gram: &QMat, a: &QMat) -> Subspace {
    let d = alg.dim();
    let ad = ad_exact(alg, a);
    let adi = ad.inverse().expect("invertible");
    let mut vecs = Vec::new();
    for j in 0..3 * d {
        let e = |k: usize| if j / d == k { crate::exactla::unit(d, j % d) } else { vec![Q::zero(); d] };
        let (x, u1, u2) = (e(0), e(1), e(2));
        let xi: Vec<Q> = (0..d)
            .map(|i| {
                let y = crate::exactla::unit(d, i);
                let (ly, lx) = (adi.mul_vec(&y), adi.mul_vec(&x));
                -exact_pair(gram, &u2, &ly) + exact_pair(gram, &u1, &y) - exact_pair(gram, &x, &y) * qf(1, 2) - exact_pair(gram, &lx, &ly) * qf(1, 2)
            })
            .collect();
        let p1 = crate::exactla::vadd(&ad.mul_vec(&u2), &x);
        let p3 = crate::exactla::vsub(&adi.mul_vec(&u1), &adi.mul_vec(&x));
        vecs.push(crate::exactla::vcat(&[&x, &xi, &p1, &u1, &p3, &u2]));
    }
    Subspace::span(6 * d, &vecs).expect("ambient 6d")
}

/// Exact properties of the `(G, 0)` Dirac structure at one point: lagrangian, the intersection rank and `pi`.
pub struct G0Exact {
    pub lagrangian: bool,
    pub intersection_rank: usize,
    pub pi: Option<QMat>,
}

pub fn g0_exact_at(alg: &MatrixLieAlgebra, gram: &QMat, a: &QMat) -> G0Exact {
    let d = alg.dim();
    let l = g0_dirac_exact(alg, gram, a);
    let gf = QForm::new(gram.clone()).expect("symmetric");
    let dform = gf.direct_sum(&gf.neg());
    let form = QForm::hyperbolic(d).direct_sum(&dform).direct_sum(&dform);
    let lagrangian = form.lagrangian_class(&l).map(|c| c == crate::exactla::LagClass::Lagrangian).unwrap_or(false);
    let z = vec![Q::zero(); d];
    let mut diag = Vec::new();
    for i in 0..d {
        diag.push(crate::exactla::vcat(&[&crate::exactla::unit(d, i), &z, &z, &z, &z, &z]));
        let w = crate::exactla::unit(d, i);
        diag.push(crate::exactla::vcat(&[&z, &z, &w, &w, &z, &z]));
        diag.push(crate::exactla::vcat(&[&z, &z, &z, &z, &w, &w]));
    }
    let delta = Subspace::span(6 * d, &diag).expect("ambient");
    let intersection_rank = l.meet(&delta).dim();
    let anti: Vec<Vec<Q>> = (0..d)
        .flat_map(|i| {
            let w = crate::exactla::unit(d, i);
            let mw = crate::exactla::vscale(&w, &q(-1));
            vec![crate::exactla::vcat(&[&w, &mw, &z, &z]), crate::exactla::vcat(&[&z, &z, &w, &mw])]
        })
        .collect();
    let c = Subspace::span(4 * d, &anti).expect("ambient");
    let pi = relations::bivector_from_complement(&l, d, &c).ok();
    G0Exact { lagrangian, intersection_rank, pi }
}

/// The `(G, 0)` multiplicative moment map suite.
pub fn g0_moment_map_suite(chart: &MatrixGroupChart, rational: usize, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let n = settings.samples;
    let d = chart.dim();
    let sigma = g0_sigma(chart);
    let phi = g0_phi();
    let omega = polwie_omega(chart);
    let theta = polwie_theta(chart);
    let signs = [1.0, -1.0, 1.0, -1.0];
    let omega_d2 = signed_sum(&omega, 2, &signs);
    let theta_d2 = signed_sum(&theta, 1, &signs);
    let mut out = Vec::new();

    // (b1): eps^* sigma = 0.
    let eps: GroupMap = Arc::new(|j: &[Jet]| {
        let id = Jet::constant(&Mat::identity(j[0].val.nrows(), j[0].val.nrows()));
        vec![j[0].clone(), j[0].clone(), id.clone(), id]
    });
    out.push(CheckRecord::from_residuals("g0.sigma_alternating", &alternating_multilinear_residuals(&sigma, chart, settings, 40, n), settings.tol));
    out.push(CheckRecord::from_residuals("g0.unit_sigma", &pointwise_residuals(&sigma.pullback(1, eps), chart, settings, 41, n), settings.tol));

    // (b1): delta sigma = Phi^* Omega on composable pairs (a1, a2, a3, g1, g2, g1', g2').
    let pr1: GroupMap = select(&[0, 1, 3, 4]);
    let pr2: GroupMap = select(&[1, 2, 5, 6]);
    let m: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].clone(), j[2].clone(), j[3].mul(&j[5]), j[4].mul(&j[6])]);
    let p1 = phi.clone();
    let p2 = phi.clone();
    let pair_phi: GroupMap = Arc::new(move |j: &[Jet]| {
        let a = p1(&[j[0].clone(), j[1].clone(), j[3].clone(), j[4].clone()]);
        let b = p2(&[j[1].clone(), j[2].clone(), j[5].clone(), j[6].clone()]);
        // Interleave to the layout expected by `signed_sum` with two slots of four blocks.
        a.into_iter().chain(b).collect()
    });
    let delta = sigma.pullback(7, pr1).add(&sigma.pullback(7, pr2)).sub(&sigma.pullback(7, m));
    let lhs = delta.sub(&omega_d2.pullback(7, pair_phi));
    out.push(CheckRecord::from_residuals("g0.delta_sigma", &pointwise_residuals(&lhs, chart, settings, 42, n), settings.tol));

    // (b1): d sigma + Phi^* Theta = 0.
    let neg_theta = theta_d2.pullback(4, phi.clone()).scale(-1.0);
    out.push(CheckRecord::from_residuals("g0.d_sigma", &fd_residuals(&sigma, Some(&neg_theta), chart, settings, 43, n)?, settings.fd_tol));

    // Contractions with right- and left-invariant fields, as consequences of delta sigma = Phi^* Omega.
    let (right, left) = g0_isotropic_residuals(chart, &sigma, &phi, &omega_d2, settings, n);
    out.push(CheckRecord::from_residuals("g0.isotropic_right", &right, settings.tol));
    out.push(CheckRecord::from_residuals("g0.isotropic_left", &left, settings.tol));

    // (b2): dimension clause.
    let (dim_h, dim_base, dim_d2) = (4 * d, 2 * d, 4 * d);
    out.push(CheckRecord::exact(
        "g0.dimension",
        1,
        (dim_h - dim_base != dim_d2 / 2).then(|| format!("dim H - dim M = {} but dim D^2 / 2 = {}", dim_h - dim_base, dim_d2 / 2)),
    ));

    // (b3) and (b4) at random points of H.
    let basis = product_basis(chart, 4);
    let out_charts = [chart; 4];
    let mut rng = settings.rng(44);
    let mut b3 = Vec::new();
    let mut b4 = Vec::new();
    for _ in 0..n {
        let pt = random_point(&[chart; 4], &mut rng);
        let w = form_matrix(&sigma, &pt, &basis);
        let tphi = map_matrix(&phi, &pt, &basis, &out_charts);
        let stacked = Mat::from_rows(&w.row_iter().chain(tphi.row_iter()).collect::<Vec<_>>());
        let (rank, _) = float_rank(&stacked);
        b3.push(if rank == 4 * d { 0.0 } else { f64::INFINITY });
        // Target values for (u, v) in g_Delta^2 x g_Delta^2.
        let dpt = {
            let base = phi(&pt.iter().map(Jet::constant).collect::<Vec<_>>());
            base.into_iter().map(|j| j.val).collect::<Vec<_>>()
        };
        let mut worst = 0.0_f64;
        for _ in 0..2 {
            let (u1, u2, v1, v2) = (chart.random_vec(&mut rng), chart.random_vec(&mut rng), chart.random_vec(&mut rng), chart.random_vec(&mut rng));
            let u = [u1.clone(), u1, u2.clone(), u2];
            let v = [v1.clone(), v1, v2.clone(), v2];
            // u^r - v^l at Phi(h), right-trivialized.
            let target_vec: Vec<Mat> = (0..4)
                .map(|c| {
                    let di = dpt[c].clone().try_inverse().expect("invertible");
                    &u[c] - &dpt[c] * &v[c] * di
                })
                .collect();
            let zeta = zeta_form(&omega_d2, &dpt, &u, &v, chart);
            // Solve T Phi Z = target and sigma(Z, .) = Phi^* zeta.
            let rhs_vec = DVector::from_iterator(4 * d, target_vec.iter().zip(&out_charts).flat_map(|(m, c)| c.coords(m).iter().copied().collect::<Vec<_>>()));
            let rhs_form = DVector::from_iterator(4 * d, basis.iter().map(|b| {
                let jets: Vec<Jet> = pt.iter().zip(b).map(|(g, x)| Jet::along(g, x)).collect();
                let img: Vec<Mat> = phi(&jets).iter().map(Jet::right).collect();
                zeta(&img)
            }));
            let a = Mat::from_rows(&tphi.row_iter().chain(w.transpose().row_iter()).collect::<Vec<_>>());
            let rhs = DVector::from_iterator(8 * d, rhs_vec.iter().chain(rhs_form.iter()).copied());
            let sol = a.clone().svd(true, true).solve(&rhs, 1e-12).expect("least squares");
            worst = worst.max((&a * sol - &rhs).abs().max() / rhs.norm().max(1.0));
        }
        b4.push(worst);
    }
    out.push(CheckRecord::from_residuals("g0.kernel_condition", &b3, 1.0));
    out.push(CheckRecord::from_residuals("g0.action_fields", &b4, settings.tol));

    // Psi^* sigma = 0 and Phi o Psi lands on the diagonal.
    let psi = g0_psi();
    out.push(CheckRecord::from_residuals("g0.psi_sigma", &pointwise_residuals(&sigma.pullback(3, psi.clone()), chart, settings, 45, n), settings.tol));
    let mut rng = settings.rng(46);
    let diag: Vec<f64> = (0..n)
        .map(|_| {
            let pt = random_point(&[chart; 3], &mut rng);
            let img = phi(&psi(&pt.iter().map(Jet::constant).collect::<Vec<_>>()));
            ((&img[0].val - &pt[0]).abs().max())
                .max((&img[1].val - &pt[0]).abs().max())
                .max((&img[2].val - &pt[1]).abs().max())
                .max((&img[3].val - &pt[1]).abs().max())
        })
        .collect();
    out.push(CheckRecord::from_residuals("g0.phi_psi_diagonal", &diag, settings.tol));

    // Closed forms of lambda_sigma and varphi at units.
    let mut rng = settings.rng(47);
    let z = Mat::zeros(chart.size, chart.size);
    let closed: Vec<f64> = (0..n)
        .map(|_| {
            let a = chart.sample(&mut rng);
            let (x, u1, u2, y) = (chart.random_vec(&mut rng), chart.random_vec(&mut rng), chart.random_vec(&mut rng), chart.random_vec(&mut rng));
            let id = chart.identity();
            let pt = vec![a.clone(), a.clone(), id.clone(), id];
            let av = vec![x.clone(), z.clone(), u1.clone(), u2.clone()];
            let yv = vec![y.clone(), y.clone(), z.clone(), z.clone()];
            let lam = (sigma.eval(&pt, &[av.clone(), yv]) - g0_lambda_closed(chart, &a, &x, &u1, &u2, &y)).abs();
            let jets: Vec<Jet> = pt.iter().zip(&av).map(|(g, u)| Jet::along(g, u)).collect();
            let img = phi(&jets);
            let expect = g0_varphi_closed(&a, &x, &u1, &u2);
            let vphi = img.iter().zip(&expect).map(|(j, e)| (j.right() - e).abs().max()).fold(0.0, f64::max);
            lam.max(vphi)
        })
        .collect();
    out.push(CheckRecord::from_residuals("g0.lambda_varphi_closed_forms", &closed, settings.tol));

    // Exact statements at rational points.
    if chart.name == "sl2" && rational > 0 {
        let gram = chart.exact.trace_gram(&chart.trace_scale);
        let mut rng = settings.rng(48);
        let mut rank_fail = None;
        let mut pi_fail = None;
        let mut lag_fail = None;
        for i in 0..rational {
            let a = if i == 0 { QMat::identity(2) } else { rational_sl2(&mut rng) };
            let r = g0_exact_at(&chart.exact, &gram, &a);
            if !r.lagrangian && lag_fail.is_none() {
                lag_fail = Some(format!("rational point {i}"));
            }
            if r.intersection_rank != 2 * d && rank_fail.is_none() {
                rank_fail = Some(format!("rational point {i}: rank {}", r.intersection_rank));
            }
            match &r.pi {
                Some(p) if p.is_zero() => {}
                other => {
                    if pi_fail.is_none() {
                        pi_fail = Some(format!("rational point {i}: {other:?}"));
                    }
                }
            }
        }
        out.push(CheckRecord::exact("g0.dirac_lagrangian_exact", rational, lag_fail));
        out.push(CheckRecord::exact("g0.intersection_rank_exact", rational, rank_fail));
        out.push(CheckRecord::exact("g0.pi_zero_exact", rational, pi_fail));
    }
    Ok(out)
}

/// Residuals of `i_{u^r} sigma = t^* lambda_sigma(u) + Phi^* zeta(varphi(u), 0)` and
/// `i_{b^l} sigma = s^* (eps^* i_b sigma) - Phi^* zeta(0, T Phi(b))` at random arrows.
fn g0_isotropic_residuals(chart: &MatrixGroupChart, sigma: &Form, phi: &GroupMap, omega_d2: &Form, settings: &Settings, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = settings.rng(49);
    let id = chart.identity();
    let z = Mat::zeros(chart.size, chart.size);
    let tphi = |pt: &[Mat], v: &[Mat]| -> Vec<Mat> {
        let jets: Vec<Jet> = pt.iter().zip(v).map(|(g, u)| Jet::along(g, u)).collect();
        phi(&jets).iter().map(Jet::right).collect()
    };
    // Omega on D^2 x D^2 at (p, q) evaluated on ((x, 0), (0, y)).
    let split = |p: &[Mat], q: &[Mat], x: &[Mat], y: &[Mat]| -> (f64, f64) {
        let pt: Vec<Mat> = p.iter().chain(q).cloned().collect();
        let a: Vec<Mat> = x.iter().cloned().chain(vec![z.clone(); 4]).collect();
        let b: Vec<Mat> = vec![z.clone(); 4].into_iter().chain(y.iter().cloned()).collect();
        omega_d2.eval_with_magnitude(&pt, &[a, b])
    };
    let ones = vec![id.clone(); 4];
    let (mut right, mut left) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let h = random_point(&[chart; 4], &mut rng);
        let y = random_tuple(&[chart; 4], &mut rng);
        let dh: Vec<Mat> = phi(&h.iter().map(Jet::constant).collect::<Vec<_>>()).into_iter().map(|j| j.val).collect();
        let ty = tphi(&h, &y);
        let (x, u1, u2) = (chart.random_vec(&mut rng), chart.random_vec(&mut rng), chart.random_vec(&mut rng));

        let unit_t = vec![h[0].clone(), h[0].clone(), id.clone(), id.clone()];
        let u = vec![x.clone(), z.clone(), u1.clone(), u2.clone()];
        let (lhs, m1) = sigma.eval_with_magnitude(&h, &[u.clone(), y.clone()]);
        let t_y = vec![y[0].clone(), y[0].clone(), z.clone(), z.clone()];
        let (first, m2) = sigma.eval_with_magnitude(&unit_t, &[u.clone(), t_y]);
        let (second, m3) = split(&ones, &dh, &tphi(&unit_t, &u), &ty);
        right.push(relative(lhs - first + second, m1 + m2 + m3));

        let unit_s = vec![h[1].clone(), h[1].clone(), id.clone(), id.clone()];
        let b = vec![z.clone(), x, u1.clone(), u2.clone()];
        let conj = |g: &Mat, v: &Mat| g * v * g.clone().try_inverse().expect("invertible");
        let bl = vec![z.clone(), b[1].clone(), conj(&h[2], &u1), conj(&h[3], &u2)];
        let (lhs, m1) = sigma.eval_with_magnitude(&h, &[bl, y.clone()]);
        let s_y = vec![y[1].clone(), y[1].clone(), z.clone(), z.clone()];
        let (first, m2) = sigma.eval_with_magnitude(&unit_s, &[b.clone(), s_y]);
        let (second, m3) = split(&dh, &ones, &ty, &tphi(&unit_s, &b));
        left.push(relative(lhs - first - second, m1 + m2 + m3));
    }
    (right, left)
}

/// `zeta(u, v)|_d = Omega|_(1,d)((0, .), (u, 0)) - Omega|_(d,1)((., 0), (0, v))` on `D^2` as a function of a vector.
fn zeta_form<'a>(omega_d2: &'a Form, dpt: &'a [Mat], u: &'a [Mat; 4], v: &'a [Mat; 4], chart: &MatrixGroupChart) -> impl Fn(&[Mat]) -> f64 + 'a {
    let id = chart.identity();
    let z = Mat::zeros(chart.size, chart.size);
    move |x: &[Mat]| {
        // Layout for the sum over the two slots: (slot0 blocks, slot1 blocks).
        let mut p1 = vec![id.clone(); 4];
        p1.extend(dpt.iter().cloned());
        let mut a1: Vec<Mat> = vec![z.clone(); 4];
        a1.extend(x.iter().cloned());
        let mut b1: Vec<Mat> = u.to_vec();
        b1.extend(vec![z.clone(); 4]);
        let first = omega_d2.eval(&p1, &[a1, b1]);
        let mut p2: Vec<Mat> = dpt.to_vec();
        p2.extend(vec![id.clone(); 4]);
        let mut a2: Vec<Mat> = x.to_vec();
        a2.extend(vec![z.clone(); 4]);
        let mut b2 = vec![z.clone(); 4];
        b2.extend(v.iter().cloned());
        first - omega_d2.eval(&p2, &[a2, b2])
    }
}

/// Source and target maps of the CA-groupoid of `(K, Omega)` composed with `e_Omega`, and its isometry.
pub fn ca_groupoid_maps(chart: &MatrixGroupChart, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let omega = polwie_omega(chart);
    let d = chart.dim();
    let z = Mat::zeros(chart.size, chart.size);
    let id = chart.identity();
    let mut rng = settings.rng(51);
    let mut rt = Vec::new();
    let mut iso = Vec::new();
    // e_Omega(u + v) as (x, alpha) with alpha given on basis vectors.
    let e = |k: &Mat, u: &Mat, v: &Mat| -> (Mat, Vec<f64>) {
        let ki = k.clone().try_inverse().expect("invertible");
        let x = u - k * v * &ki;
        let alpha = chart
            .basis
            .iter()
            .map(|b| {
                omega.eval(&[id.clone(), k.clone()], &[vec![z.clone(), b.clone()], vec![u.clone(), z.clone()]])
                    - omega.eval(&[k.clone(), id.clone()], &[vec![b.clone(), z.clone()], vec![z.clone(), v.clone()]])
            })
            .collect();
        (x, alpha)
    };
    let alpha_on = |alpha: &[f64], y: &Mat| -> f64 { chart.coords(y).iter().zip(alpha).map(|(c, a)| c * a).sum() };
    for _ in 0..settings.samples {
        let k = chart.sample(&mut rng);
        let ki = k.clone().try_inverse().expect("invertible");
        let (u, v) = (chart.random_vec(&mut rng), chart.random_vec(&mut rng));
        let (x, alpha) = e(&k, &u, &v);
        let mut worst = 0.0_f64;
        for w in &chart.basis {
            let t = alpha_on(&alpha, w) + omega.eval(&[id.clone(), k.clone()], &[vec![z.clone(), x.clone()], vec![w.clone(), z.clone()]]);
            let s = alpha_on(&alpha, &(&k * w * &ki)) + omega.eval(&[k.clone(), id.clone()], &[vec![x.clone(), z.clone()], vec![z.clone(), w.clone()]]);
            worst = worst.max((t - chart.pair(&u, w)).abs()).max((s - chart.pair(&v, w)).abs());
        }
        rt.push(worst);
        let (u2, v2) = (chart.random_vec(&mut rng), chart.random_vec(&mut rng));
        let (x2, alpha2) = e(&k, &u2, &v2);
        let lhs = alpha_on(&alpha, &x2) + alpha_on(&alpha2, &x);
        iso.push((lhs - (chart.pair(&u, &u2) - chart.pair(&v, &v2))).abs());
    }
    let _ = d;
    Ok(vec![
        CheckRecord::from_residuals("ca_groupoid.source_target_round_trip", &rt, settings.tol),
        CheckRecord::from_residuals("ca_groupoid.pairing_preserved", &iso, settings.tol),
    ])
}

/// Borel data of `sl(2, R)`: the Lie algebra of `G* x (G*)^vee` inside `d^2` in the layout of the `(G, 0)` suite.
fn luwei_l(chart: &MatrixGroupChart) -> Mat {
    let s = subspace_f64(&qlie::gauss_s_sl2());
    let d = chart.dim();
    let mut cols = Vec::new();
    for c in s.column_iter() {
        let mut v = DVector::zeros(4 * d);
        v.rows_mut(0, 2 * d).copy_from(&c);
        cols.push(v);
        let mut w = DVector::zeros(4 * d);
        w.rows_mut(2 * d, d).copy_from(&c.rows(d, d));
        w.rows_mut(3 * d, d).copy_from(&c.rows(0, d));
        cols.push(w);
    }
    Mat::from_columns(&cols)
}

/// Fibred product of the `(G, 0)` moment map with `G* x (G*)^vee` at units `(a, a, 1, 1)`:
/// fibre dimension `2 dim G` and `ker Ts cap ker omega cap ker Tt = 0`.
pub fn luwei_check(chart: &MatrixGroupChart, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    if chart.name != "sl2" {
        return Err(GrpError::Unsupported("luwei_check", chart.name.clone()));
    }
    let d = chart.dim();
    let sigma = g0_sigma(chart);
    let phi = g0_phi();
    let basis = product_basis(chart, 4);
    let l = luwei_l(chart);
    let proj = {
        let q = orth(&l);
        Mat::identity(4 * d, 4 * d) - &q * q.transpose()
    };
    let mut rng = settings.rng(61);
    let mut dims = Vec::new();
    let mut nondeg = Vec::new();
    for i in 0..settings.samples {
        let a = chart.sample(&mut rng);
        let id = chart.identity();
        let pt = vec![a.clone(), a, id.clone(), id];
        let tphi = map_matrix(&phi, &pt, &basis, &[chart; 4]);
        // Tangent space of the fibre product: T Phi(Z) in l.
        let ker = null_space(&(&proj * &tphi));
        dims.push(if ker.ncols() == 2 * d { 0.0 } else { f64::INFINITY });
        if ker.ncols() != 2 * d {
            return Err(GrpError::Transversality(i));
        }
        let vecs: Vec<Vec<Mat>> = ker
            .column_iter()
            .map(|c| (0..4).map(|f| chart.from_coords(&c.rows(f * d, d).iter().copied().collect::<Vec<_>>())).collect())
            .collect();
        let w = form_matrix(&sigma, &pt, &vecs);
        let ts = ker.rows(d, d).into_owned();
        let tt = ker.rows(0, d).into_owned();
        let stacked = Mat::from_rows(&w.row_iter().chain(ts.row_iter()).chain(tt.row_iter()).collect::<Vec<_>>());
        let (rank, smin) = float_rank(&stacked);
        nondeg.push(if rank == 2 * d && smin > 1e-6 { 0.0 } else { f64::INFINITY });
    }
    let mut out = vec![
        CheckRecord::from_residuals("luwei.fibre_dimension", &dims, 0.5),
        CheckRecord::from_residuals("luwei.nondegenerate_at_units", &nondeg, 0.5),
    ];
    out.extend(luwei_general_points(chart, &sigma, settings)?);
    out.extend(luwei_l_isotropic(chart, settings));
    Ok(out)
}

/// Equations of `Phi^-1(G* x (G*)^vee)` in the entries of `(a1, a2, g1, g2)`, with their derivative along raw tangents `v`.
fn luwei_equations(pt: &[Mat], v: &[Mat]) -> (Vec<f64>, Vec<f64>) {
    let jets: Vec<Jet> = pt.iter().zip(v).map(|(g, t)| Jet { val: g.clone(), tan: t.clone() }).collect();
    let img = g0_phi()(&jets);
    let (mut val, mut tan) = (Vec::with_capacity(10), Vec::with_capacity(10));
    for j in &jets {
        let (a, t) = (&j.val, &j.tan);
        val.push(a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)] - 1.0);
        tan.push(t[(0, 0)] * a[(1, 1)] + a[(0, 0)] * t[(1, 1)] - t[(0, 1)] * a[(1, 0)] - a[(0, 1)] * t[(1, 0)]);
    }
    // (b, b') in G*: b upper triangular, b' lower triangular, inverse diagonal parts.
    for (b, bm) in [(&img[0], &img[1]), (&img[3], &img[2])] {
        val.push(b.val[(1, 0)]);
        tan.push(b.tan[(1, 0)]);
        val.push(bm.val[(0, 1)]);
        tan.push(bm.tan[(0, 1)]);
        val.push(b.val[(0, 0)] * bm.val[(0, 0)] - 1.0);
        tan.push(b.tan[(0, 0)] * bm.val[(0, 0)] + b.val[(0, 0)] * bm.tan[(0, 0)]);
    }
    (val, tan)
}

fn entry_mats(x: &DVector<f64>) -> Vec<Mat> {
    (0..4).map(|f| Mat::from_row_slice(2, 2, &x.as_slice()[4 * f..4 * f + 4])).collect()
}

fn entry_vec(m: &[Mat]) -> DVector<f64> {
    DVector::from_iterator(16, m.iter().flat_map(|a| vec![a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]]))
}

/// Values and Jacobian of [`luwei_equations`] in entry coordinates.
fn luwei_jacobian(pt: &[Mat]) -> (DVector<f64>, Mat) {
    let mut jac = Mat::zeros(10, 16);
    let mut val = Vec::new();
    for c in 0..16 {
        let mut e = DVector::zeros(16);
        e[c] = 1.0;
        let (v, t) = luwei_equations(pt, &entry_mats(&e));
        jac.set_column(c, &DVector::from_vec(t));
        val = v;
    }
    (DVector::from_vec(val), jac)
}

/// Implicit-function chart `t -> h + V t + W s(t)` of the fibred product near `h`,
/// with `V` spanning the tangent space and `W` the normal space at `h`.
struct LuweiChart {
    base: DVector<f64>,
    tangent: Mat,
    normal: Mat,
}

impl LuweiChart {
    fn at(pt: &[Mat]) -> LuweiChart {
        let (_, jac) = luwei_jacobian(pt);
        LuweiChart { base: entry_vec(pt), tangent: null_space(&jac), normal: jac.transpose() }
    }

    /// Point `psi(t)` and the raw tangents `d psi(e_k)`, or `None` when Newton's method stalls.
    fn eval(&self, t: &DVector<f64>) -> Option<(Vec<Mat>, Vec<Vec<Mat>>)> {
        let mut s = DVector::zeros(self.normal.ncols());
        let lin = &self.base + &self.tangent * t;
        let tol = 1e-14 * lin.amax().max(1.0).powi(3);
        for _ in 0..60 {
            let pt = entry_mats(&(&lin + &self.normal * &s));
            let (f, jac) = luwei_jacobian(&pt);
            let jw = (&jac * &self.normal).lu();
            if f.amax() < tol {
                let dpsi = &self.tangent - &self.normal * jw.solve(&(&jac * &self.tangent))?;
                let tans = dpsi.column_iter().map(|c| entry_mats(&c.into_owned())).collect();
                return Some((pt, tans));
            }
            s -= jw.solve(&f)?;
            if !s.iter().all(|x| x.is_finite()) || s.amax() > 1e3 {
                return None;
            }
        }
        None
    }
}

fn right_trivialize(pt: &[Mat], tan: &[Mat]) -> Vec<Mat> {
    pt.iter().zip(tan).map(|(g, v)| v * g.clone().try_inverse().expect("invertible")).collect()
}

/// Induced form on the fibred product in chart coordinates, as a matrix.
fn luwei_omega(sigma: &Form, pt: &[Mat], tans: &[Vec<Mat>]) -> (Mat, f64) {
    let vecs: Vec<Vec<Mat>> = tans.iter().map(|t| right_trivialize(pt, t)).collect();
    let k = vecs.len();
    let mut w = Mat::zeros(k, k);
    let mut mag = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let (x, m) = sigma.eval_with_magnitude(pt, &[vecs[i].clone(), vecs[j].clone()]);
            w[(i, j)] = x;
            mag = mag.max(m);
        }
    }
    (w, mag)
}

/// Rank conditions and closedness of the induced form at general points of `Phi^-1(G* x (G*)^vee)`.
fn luwei_general_points(chart: &MatrixGroupChart, sigma: &Form, settings: &Settings) -> Result<Vec<CheckRecord>, GrpError> {
    let d = chart.dim();
    let theta_d2 = signed_sum(&polwie_theta(chart), 1, &[1.0, -1.0, 1.0, -1.0]);
    let phi_theta = theta_d2.pullback(4, g0_phi());
    let mut rng = settings.rng(62);
    let (mut dims, mut nondeg, mut closed_fd, mut closed_pt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let h = settings.fd_step;
    for i in 0..settings.samples {
        let mut found = None;
        for _ in 0..20 {
            let a = chart.sample(&mut rng);
            let unit = LuweiChart::at(&[a.clone(), a, chart.identity(), chart.identity()]);
            let t = DVector::from_fn(unit.tangent.ncols(), |_, _| rng.gen_range(-0.6..0.6));
            if let Some((pt, _)) = unit.eval(&t) {
                found = Some(pt);
                break;
            }
        }
        let pt = found.ok_or(GrpError::Transversality(i))?;
        let local = LuweiChart::at(&pt);
        let k = local.tangent.ncols();
        dims.push(if k == 2 * d { 0.0 } else { f64::INFINITY });
        if k != 2 * d {
            return Err(GrpError::Transversality(i));
        }
        let (pt, tans) = local.eval(&DVector::zeros(k)).ok_or(GrpError::Transversality(i))?;
        let (w, _) = luwei_omega(sigma, &pt, &tans);
        let rt: Vec<Vec<Mat>> = tans.iter().map(|t| right_trivialize(&pt, t)).collect();
        let ts = Mat::from_fn(d, k, |r, c| chart.coords(&rt[c][1])[r]);
        let tt = Mat::from_fn(d, k, |r, c| chart.coords(&rt[c][0])[r]);
        let stacked = Mat::from_rows(&w.row_iter().chain(ts.row_iter()).chain(tt.row_iter()).collect::<Vec<_>>());
        let (rank, smin) = float_rank(&stacked);
        nondeg.push(if rank == 2 * d && smin > 1e-6 { 0.0 } else { f64::INFINITY });

        // d omega(X, Y, Z) = X omega(Y, Z) - Y omega(X, Z) + Z omega(X, Y) for constant fields in the chart.
        let dirs: Vec<DVector<f64>> = (0..3).map(|_| DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let derivative = |x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, step: f64| -> Option<(f64, f64)> {
            let (pp, tp) = local.eval(&(x * step))?;
            let (pm, tm) = local.eval(&(x * -step))?;
            let (wp, mp) = luwei_omega(sigma, &pp, &tp);
            let (wm, mm) = luwei_omega(sigma, &pm, &tm);
            let diff = (y.transpose() * (wp - wm) * z)[(0, 0)] / (2.0 * step);
            Some((diff, (mp + mm) / 2.0))
        };
        let d_omega = |step: f64| -> Option<(f64, f64)> {
            let (a, ma) = derivative(&dirs[0], &dirs[1], &dirs[2], step)?;
            let (b, mb) = derivative(&dirs[1], &dirs[0], &dirs[2], step)?;
            let (c, mc) = derivative(&dirs[2], &dirs[0], &dirs[1], step)?;
            Some((a - b + c, ma + mb + mc))
        };
        let (d1, m1) = d_omega(h).ok_or(GrpError::Transversality(i))?;
        let (d2, m2) = d_omega(h / 2.0).ok_or(GrpError::Transversality(i))?;
        let scale: f64 = dirs.iter().map(|v| v.norm()).product();
        closed_fd.push(relative((4.0 * d2 - d1) / 3.0, m1.max(m2) * scale));

        // Pointwise: the closedness defect of the induced form is the pullback of Theta on D^2.
        let args: Vec<Vec<Mat>> = dirs.iter().map(|v| right_trivialize(&pt, &combine(&tans, v))).collect();
        let (x, m) = phi_theta.eval_with_magnitude(&pt, &args);
        closed_pt.push(relative(x, m));
    }
    Ok(vec![
        CheckRecord::from_residuals("luwei.fibre_dimension_general", &dims, 0.5),
        CheckRecord::from_residuals("luwei.nondegenerate_general", &nondeg, 0.5),
        CheckRecord::from_residuals("luwei.omega_closed_pointwise", &closed_pt, settings.tol),
        CheckRecord::from_residuals("luwei.omega_closed", &closed_fd, settings.fd_tol),
    ])
}

fn combine(tans: &[Vec<Mat>], coeffs: &DVector<f64>) -> Vec<Mat> {
    (0..tans[0].len()).map(|f| tans.iter().zip(coeffs.iter()).map(|(t, c)| &t[f] * *c).sum()).collect()
}

/// Random point of `G* x (G*)^vee` and a random right-trivialized tangent there.
fn luwei_l_sample<R: Rng>(rng: &mut R) -> (Vec<Mat>, Vec<Mat>) {
    let gstar = |rng: &mut R| {
        let t = rng.gen_range(-0.7_f64..0.7).exp();
        let b = Mat::from_row_slice(2, 2, &[t, rng.gen_range(-1.0..1.0), 0.0, 1.0 / t]);
        let bm = Mat::from_row_slice(2, 2, &[1.0 / t, 0.0, rng.gen_range(-1.0..1.0), t]);
        let h = rng.gen_range(-1.0..1.0);
        let u = Mat::from_row_slice(2, 2, &[h, rng.gen_range(-1.0..1.0), 0.0, -h]);
        let um = Mat::from_row_slice(2, 2, &[-h, 0.0, rng.gen_range(-1.0..1.0), h]);
        (b, bm, u, um)
    };
    let (b, bm, u, um) = gstar(rng);
    let (c, cm, w, wm) = gstar(rng);
    (vec![b, bm, cm, c], vec![u, um, wm, w])
}

/// `Omega` on `L x L` and `Theta` on `L` vanish for `L = G* x (G*)^vee` in `D^2`.
fn luwei_l_isotropic(chart: &MatrixGroupChart, settings: &Settings) -> Vec<CheckRecord> {
    let signs = [1.0, -1.0, 1.0, -1.0];
    let omega_d2 = signed_sum(&polwie_omega(chart), 2, &signs);
    let theta_d2 = signed_sum(&polwie_theta(chart), 1, &signs);
    let mut rng = settings.rng(63);
    let (mut om, mut th) = (Vec::new(), Vec::new());
    for _ in 0..settings.samples {
        let (p1, x1) = luwei_l_sample(&mut rng);
        let (p2, y2) = luwei_l_sample(&mut rng);
        let (_, x2) = luwei_l_sample(&mut rng);
        let (_, y1) = luwei_l_sample(&mut rng);
        let pt: Vec<Mat> = p1.iter().chain(&p2).cloned().collect();
        let a: Vec<Mat> = x1.iter().chain(&x2).cloned().collect();
        let b: Vec<Mat> = y1.iter().chain(&y2).cloned().collect();
        let (x, m) = omega_d2.eval_with_magnitude(&pt, &[a, b]);
        om.push(relative(x, m));
        let (x, m) = theta_d2.eval_with_magnitude(&p1, &[x1, x2, y1]);
        th.push(relative(x, m));
    }
    vec![
        CheckRecord::from_residuals("luwei.omega_vanishes_on_l", &om, settings.tol),
        CheckRecord::from_residuals("luwei.theta_vanishes_on_l", &th, settings.tol),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> Settings {
        Settings { samples: 6, ..Settings::default() }
    }

    fn all_pass(r: &[CheckRecord]) {
        for c in r {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn maurer_cartan_forms() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let id = c.identity();
        let u = c.random_vec(&mut rng);
        assert_eq!(mc_eval(Side::Left, &TangentVec { base: id, u: u.clone() }).unwrap(), u);
        let g = c.sample(&mut rng);
        let (v1, v2) = (c.random_vec(&mut rng), c.random_vec(&mut rng));
        let (t1, t2) = (TangentVec { base: g.clone(), u: v1 }, TangentVec { base: g.clone(), u: v2 });
        let l = c.pair(&mc_eval(Side::Left, &t1).unwrap(), &mc_eval(Side::Left, &t2).unwrap());
        let r = c.pair(&mc_eval(Side::Right, &t1).unwrap(), &mc_eval(Side::Right, &t2).unwrap());
        assert!((l - r).abs() < 1e-12);
        let gi = g.clone().try_inverse().unwrap();
        assert!((mc_eval(Side::Left, &t1).unwrap() - &gi * &t1.u * &g).abs().max() < 1e-14);
    }

    #[test]
    fn omega_at_units_and_commuting_theta() {
        let c = MatrixGroupChart::catalog("su2").unwrap();
        let omega = polwie_omega(&c);
        let (id, z) = (c.identity(), Mat::zeros(c.size, c.size));
        let (u, v) = (c.basis[0].clone(), c.basis[1].clone() + &c.basis[0]);
        let val = omega.eval(&[id.clone(), id.clone()], &[vec![u.clone(), z.clone()], vec![z.clone(), v.clone()]]);
        assert!((val + 0.5 * c.pair(&u, &v)).abs() < 1e-14);
        let theta = polwie_theta(&c);
        let w = &u * 2.0;
        assert!(theta.eval(&[id], &[vec![u.clone()], vec![w], vec![v]]).abs() < 1e-14);
        assert!((polwie_pairing(&c) - &c.gram).abs().max() < 1e-14);
    }

    #[test]
    fn maurer_cartan_equation_by_finite_differences() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u0 = c.random_vec(&mut rng);
        let cc = c.clone();
        let alpha = Form::new(1, 1, move |_, v| cc.pair(&u0, &v[0][0]));
        let g = c.sample(&mut rng);
        let (x, y) = (c.random_vec(&mut rng), c.random_vec(&mut rng));
        let d = fd_ext_d(&alpha, &[g.clone()], &[vec![x.clone()], vec![y.clone()]], 1e-5, false).unwrap();
        // d<u, theta^r>(x, y) = -<u, [x, y]> for right-invariant fields.
        let expect = -alpha.eval(&[g], &[vec![MatrixGroupChart::bracket(&x, &y)]]);
        assert!((d - expect).abs() < 1e-9);
        assert_eq!(fd_ext_d(&alpha, &[c.identity()], &[vec![x.clone()], vec![y]], 0.0, false), Err(GrpError::StepUnderflow(0.0)));
    }

    #[test]
    fn richardson_improves_order() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        let theta = polwie_theta(&c);
        let omega = polwie_omega(&c);
        let rhs = nerve_delta(&theta, 1).scale(-1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pt = vec![c.sample(&mut rng), c.sample(&mut rng)];
        let vecs: Vec<Vec<Mat>> = (0..3).map(|_| vec![c.random_vec(&mut rng), c.random_vec(&mut rng)]).collect();
        let exact = rhs.eval(&pt, &vecs);
        let e1 = (fd_ext_d(&omega, &pt, &vecs, 1e-2, false).unwrap() - exact).abs();
        let e2 = (fd_ext_d(&omega, &pt, &vecs, 5e-3, false).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        let er = (fd_ext_d(&omega, &pt, &vecs, 1e-2, true).unwrap() - exact).abs();
        assert!(er < e2);
    }

    #[test]
    fn polwie_and_amm_suites() {
        for name in ["sl2", "su2"] {
            let c = MatrixGroupChart::catalog(name).unwrap();
            all_pass(&polwie_suite(&c, &fast()).unwrap());
            all_pass(&amm_suite(&c, &fast()).unwrap());
        }
    }

    #[test]
    fn abelian_group_gives_exact_zeros() {
        let c = MatrixGroupChart::catalog("torus2").unwrap();
        let r = polwie_suite(&c, &fast()).unwrap();
        all_pass(&r);
        let delta = r.iter().find(|c| c.check == "polwie.delta_omega").unwrap();
        assert!(delta.max_residual < 1e-15);
        all_pass(&arrow_groupoid_suite(&c, &fast()).unwrap());
        all_pass(&ca_groupoid_maps(&c, &fast()).unwrap());
    }

    #[test]
    fn arrows_and_ca_groupoid() {
        let c = MatrixGroupChart::catalog("su2").unwrap();
        all_pass(&arrow_groupoid_suite(&c, &fast()).unwrap());
        all_pass(&ca_groupoid_maps(&c, &fast()).unwrap());
    }

    #[test]
    fn arrows_fibre_at_identity_is_cartan_image() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        let gram = c.exact.trace_gram(&c.trace_scale);
        let id = QMat::identity(2);
        let fiber = arrows_fiber_exact(&c.exact, &gram, &id);
        let full = Subspace::full(6);
        let disp = cartan_display_exact(&c.exact, &gram, &id, &full);
        let proj: Vec<Vec<Q>> = fiber.basis().iter().map(|v| v[..6].to_vec()).collect();
        assert_eq!(Subspace::span(6, &proj).unwrap(), disp);
    }

    #[test]
    fn gauss_cartan_reductions() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        let r = gauss_cartan_fibred(&c, 4, &fast()).unwrap();
        assert_eq!(r.len(), 4);
        all_pass(&r);
    }

    #[test]
    fn g0_suite_passes() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        all_pass(&g0_moment_map_suite(&c, 3, &fast()).unwrap());
    }

    #[test]
    fn luwei_fibred_product() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        all_pass(&luwei_check(&c, &fast()).unwrap());
        assert!(luwei_check(&MatrixGroupChart::catalog("su2").unwrap(), &fast()).is_err());
        // A single summand of sigma is not closed on the fibred product.
        let partial = polwie_omega(&c).pullback(4, select(&[0, 3]));
        let r = luwei_general_points(&c, &partial, &fast()).unwrap();
        let closed = r.iter().find(|r| r.check == "luwei.omega_closed").unwrap();
        assert!(!closed.pass && closed.max_residual > 1e-3, "{closed:?}");
    }

    #[test]
    fn flipped_signs_are_detected() {
        let c = MatrixGroupChart::catalog("sl2").unwrap();
        let set = fast();
        let sigma = arrows_sigma(&c);
        let wrong_k = signed_sum(&polwie_omega(&c), 2, &[1.0, -1.0]);
        let pr1: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].clone(), j[1].clone(), j[2].mul(&j[4]).mul(&j[3].inv())]);
        let pr2: GroupMap = select(&[2, 3, 4]);
        let m: GroupMap = Arc::new(|j: &[Jet]| vec![j[0].mul(&j[2]), j[1].mul(&j[3]), j[4].clone()]);
        let delta = sigma.pullback(5, pr1).add(&sigma.pullback(5, pr2)).sub(&sigma.pullback(5, m));
        let lhs = delta.sub(&wrong_k.pullback(5, select(&[0, 1, 2, 3])));
        assert!(!CheckRecord::from_residuals("w", &pointwise_residuals(&lhs, &c, &set, 31, 6), 1e-3).pass);
        let omega = amm_omega(&c);
        let eta = polwie_theta(&c);
        let (s, t, ..) = amm_maps();
        let wrong = eta.pullback(2, t).sub(&eta.pullback(2, s));
        assert!(!CheckRecord::from_residuals("w", &fd_residuals(&omega, Some(&wrong), &c, &set, 12, 6).unwrap(), 1e-3).pass);
        let g0 = g0_sigma(&c).pullback(3, g0_psi()).add(&polwie_omega(&c).pullback(3, select(&[0, 2])));
        assert!(!CheckRecord::from_residuals("w", &pointwise_residuals(&g0, &c, &set, 45, 6), 1e-3).pass);
    }

    #[test]
    fn residual_records_report_worst_sample() {
        let r = CheckRecord::from_residuals("x", &[1e-12, 0.5, 1e-3], 1e-9);
        assert!(!r.pass);
        assert_eq!(r.max_residual, 0.5);
        assert!(r.witness.unwrap().contains("sample 1"));
        let nan = CheckRecord::from_residuals("y", &[f64::NAN], 1.0);
        assert!(!nan.pass && nan.max_residual.is_finite());
    }
}
