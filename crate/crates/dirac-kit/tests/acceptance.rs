//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Every count, seed and tolerance is pinned below so that reruns are
//! byte-for-byte comparable.

use dirac_kit::courant::{self, ActionCourant, ProductCourant};
use dirac_kit::exactla::QMat;
use dirac_kit::grpnum::{self, CheckRecord, MatrixGroupChart, Settings};
use dirac_kit::polycal::{Poly, PolyForm};
use dirac_kit::qlie;
use dirac_kit::relations;
use dirac_kit::shifted;
use dirac_kit::weil::{self, WeilAlgebra};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

/// Pointwise identities evaluated in floating point.
const POINTWISE_TOL: f64 = 1e-9;
/// Identities involving a finite-difference exterior derivative.
const FD_TOL: f64 = 1e-6;
/// Central-difference step before Richardson extrapolation.
const FD_STEP: f64 = 1e-3;
const SEED: u64 = 0x5EED;

const DOUBLE_TRIPLES: usize = 25;
const DOUBLE_BUDGET: Duration = Duration::from_secs(5);
const FIBRED_PAIRS: usize = 100;
const RATIONAL_POINTS: usize = 20;
const FLOAT_POINTS: usize = 50;
const FIBRED_BUDGET: Duration = Duration::from_secs(10);
const SHIFTED_FIBRES: usize = 200;
const WEIL_ELEMENTS: usize = 100;
const WEIL_MAX_P: usize = 3;
const WEIL_KAPPAS: usize = 50;
const POLWIE_TRIPLES: usize = 100;
const AMM_SAMPLES: usize = 50;
const G0_SAMPLES: usize = 50;
const QPOISSON_INSTANCES: usize = 25;
const COURANT_TRIALS: usize = 3;
const GAUGE_PAIRS: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn exact(witness: Option<String>, what: &str) -> Self {
        match witness {
            None => Outcome { pass: true, detail: what.to_string() },
            Some(w) => Outcome { pass: false, detail: format!("{what}; {w}") },
        }
    }

    fn records(records: &[CheckRecord]) -> Self {
        let failed: Vec<String> = records.iter().filter(|r| !r.pass).map(|r| format!("{} ({:.3e} > {:.1e})", r.check, r.max_residual, r.tolerance)).collect();
        let worst = records.iter().filter(|r| r.tolerance > 0.0 && r.tolerance < 1.0).map(|r| r.max_residual / r.tolerance).fold(0.0, f64::max);
        if failed.is_empty() {
            Outcome { pass: true, detail: format!("{} checks, worst residual/tolerance {worst:.2e}", records.len()) }
        } else {
            Outcome { pass: false, detail: format!("failed: {}", failed.join(", ")) }
        }
    }

    fn and(self, other: Outcome) -> Self {
        Outcome { pass: self.pass && other.pass, detail: format!("{}; {}", self.detail, other.detail) }
    }

    fn within(self, elapsed: Duration, budget: Duration) -> Self {
        let ok = elapsed < budget;
        Outcome { pass: self.pass && ok, detail: format!("{}; {:.2} s of {} s", self.detail, elapsed.as_secs_f64(), budget.as_secs()) }
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ tag)
}

fn settings(samples: usize) -> Settings {
    Settings { seed: SEED, samples, tol: POINTWISE_TOL, fd_tol: FD_TOL, fd_step: FD_STEP }
}

fn chart(name: &str) -> MatrixGroupChart {
    MatrixGroupChart::catalog(name).expect("catalog chart")
}

fn err<E: std::fmt::Display>(e: E) -> Outcome {
    Outcome { pass: false, detail: format!("error: {e}") }
}

fn drinfeld_round_trips() -> Outcome {
    let start = Instant::now();
    let r = qlie::double_round_trips(DOUBLE_TRIPLES, &mut rng(1));
    let elapsed = start.elapsed();
    match r {
        Ok(w) => Outcome::exact(w, &format!("{} random triples and the standard sl2 bialgebra", DOUBLE_TRIPLES)).within(elapsed, DOUBLE_BUDGET),
        Err(e) => err(e),
    }
}

fn chi_quarter() -> Outcome {
    let mut out = Outcome { pass: true, detail: String::new() };
    for (name, g) in [("sl2", qlie::sl2_trace()), ("su2", qlie::su2_trace())] {
        let o = match qlie::chi_quarter_violation(&g) {
            Ok(v) => Outcome::exact(v.map(|t| format!("basis triple {t:?}")), &format!("{name}: all basis triples")),
            Err(e) => err(e),
        };
        out = if out.detail.is_empty() { o } else { out.and(o) };
    }
    out
}

fn dirac_reduction() -> Outcome {
    match relations::reduction_round_trips(FIBRED_PAIRS, &mut rng(3)) {
        Ok(w) => Outcome::exact(w, &format!("{FIBRED_PAIRS} fibred pairs: half rank, injective projection")),
        Err(e) => err(e),
    }
}

fn cartan_gauss_fibred() -> Outcome {
    let start = Instant::now();
    let r = grpnum::gauss_cartan_fibred(&chart("sl2"), RATIONAL_POINTS, &settings(FLOAT_POINTS));
    let elapsed = start.elapsed();
    match r {
        Ok(records) => Outcome::records(&records).within(elapsed, FIBRED_BUDGET),
        Err(e) => err(e),
    }
}

fn shifted_equivalence() -> Outcome {
    match shifted::prop_lag_agreement(SHIFTED_FIBRES, &mut rng(5)) {
        Ok(w) => Outcome::exact(w, &format!("{SHIFTED_FIBRES} fibres, half lagrangian, zero disagreements")),
        Err(e) => err(e),
    }
}

fn gl2_invariant_forms() -> Vec<QMat> {
    let m = qlie::gl2_matrix();
    let n = m.dim();
    let mut trtr = QMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            trtr[(i, j)] = m.basis[i].trace() * m.basis[j].trace();
        }
    }
    vec![qlie::gl2_trace().form.gram().clone(), trtr]
}

fn weil_double_complex() -> Outcome {
    let mut out = Outcome { pass: true, detail: String::new() };
    let cases = [("sl2", qlie::sl2_trace().lie, vec![qlie::sl2_trace().form.gram().clone()]), ("gl2", qlie::gl2_trace().lie, gl2_invariant_forms())];
    for (tag, (name, lie, invariant)) in cases.into_iter().enumerate() {
        let w = WeilAlgebra::new(lie);
        let identities = match weil::double_complex_identities(&w, WEIL_ELEMENTS, WEIL_MAX_P, &mut rng(60 + tag as u64)) {
            Ok(v) => Outcome::exact(v, &format!("{name}: {WEIL_ELEMENTS} elements")),
            Err(e) => err(e),
        };
        let closed = match weil::closedness_matches_invariance(&w, &invariant, WEIL_KAPPAS, &mut rng(62 + tag as u64)) {
            Ok((k, v)) => Outcome::exact(v, &format!("{name}: {WEIL_KAPPAS} kappa ({k} invariant)")),
            Err(e) => err(e),
        };
        let o = identities.and(closed);
        out = if out.detail.is_empty() { o } else { out.and(o) };
    }
    out
}

fn polwie_certification() -> Outcome {
    let mut exact = None;
    for (name, g) in [("sl2", qlie::sl2_trace()), ("su2", qlie::su2_trace())] {
        let f = shifted::pairing_from_omega2(g.dim(), shifted::polwie_omega_at_units(&g));
        if f.gram() != g.form.gram() && exact.is_none() {
            exact = Some(format!("{name}: recovered pairing differs"));
        }
    }
    let mut out = Outcome::exact(exact, "pairing recovered exactly for sl2, su2");
    for name in ["sl2", "su2"] {
        out = out.and(match grpnum::polwie_suite(&chart(name), &settings(POLWIE_TRIPLES)) {
            Ok(r) => Outcome::records(&r),
            Err(e) => err(e),
        });
    }
    out
}

fn amm_suite() -> Outcome {
    match grpnum::amm_suite(&chart("su2"), &settings(AMM_SAMPLES)) {
        Ok(r) => Outcome::records(&r),
        Err(e) => err(e),
    }
}

fn g0_suite() -> Outcome {
    match grpnum::g0_moment_map_suite(&chart("sl2"), RATIONAL_POINTS, &settings(G0_SAMPLES)) {
        Ok(r) => {
            let expected = ["g0.unit_sigma", "g0.delta_sigma", "g0.d_sigma", "g0.kernel_condition", "g0.action_fields", "g0.psi_sigma", "g0.intersection_rank_exact", "g0.pi_zero_exact", "g0.dimension"];
            let missing: Vec<&str> = expected.iter().copied().filter(|e| !r.iter().any(|c| c.check == *e)).collect();
            let o = Outcome::records(&r);
            if missing.is_empty() {
                o
            } else {
                Outcome { pass: false, detail: format!("missing records {missing:?}") }
            }
        }
        Err(e) => err(e),
    }
}

fn quasi_poisson() -> Outcome {
    let round = match courant::qpoisson_round_trips(QPOISSON_INSTANCES, &mut rng(10)) {
        Ok(w) => Outcome::exact(w, &format!("{QPOISSON_INSTANCES} encode/decode round trips")),
        Err(e) => err(e),
    };
    let rejected = match courant::qpoisson_perturbations_rejected(QPOISSON_INSTANCES, &mut rng(11)) {
        Ok(w) => Outcome::exact(w, &format!("{QPOISSON_INSTANCES} perturbations rejected")),
        Err(e) => err(e),
    };
    round.and(rejected)
}

fn courant_axioms() -> Outcome {
    let mut r = rng(12);
    let x0 = Poly::var(3, 0);
    let volume = PolyForm::from_components(3, 3, &[(vec![0, 1, 2], Poly::one(3))]).expect("volume form");
    let cases: Vec<(&str, Result<(usize, Option<String>), courant::CourantError>)> = vec![
        ("TM", courant::axiom_suite(&ProductCourant::standard(3), COURANT_TRIALS, 2, &mut r)),
        (
            "T_eta M",
            ProductCourant::twisted(volume.mul_fn(&x0)).and_then(|ca| courant::axiom_suite(&ca, COURANT_TRIALS, 1, &mut r)),
        ),
        (
            "TM x sl2",
            ProductCourant::new(2, None, Some(qlie::sl2_trace())).and_then(|ca| courant::axiom_suite(&ca, COURANT_TRIALS, 2, &mut r)),
        ),
        ("Cartan action", courant::axiom_suite::<ActionCourant, _>(&courant::cartan_action_gl2(), 2, 1, &mut r)),
    ];
    let mut out = Outcome { pass: true, detail: String::new() };
    for (name, res) in cases {
        let o = match res {
            Ok((t, w)) => Outcome::exact(w, &format!("{name}: {t} trials")),
            Err(e) => err(e),
        };
        out = if out.detail.is_empty() { o } else { out.and(o) };
    }
    let gauge = (|| -> Result<Option<String>, courant::CourantError> {
        let ca = ProductCourant::twisted(volume.clone())?;
        let b = PolyForm::random(3, 2, 2, &mut r).expect("random 2-form");
        for i in 0..GAUGE_PAIRS {
            let (e1, e2) = (ca.random_section(2, &mut r), ca.random_section(2, &mut r));
            if !courant::gauge_check(&ca, &b, &e1, &e2)? {
                return Ok(Some(format!("section pair {i}")));
            }
        }
        Ok(None)
    })();
    out.and(match gauge {
        Ok(w) => Outcome::exact(w, &format!("gauge identity on {GAUGE_PAIRS} section pairs")),
        Err(e) => err(e),
    })
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("drinfeld double round trips", drinfeld_round_trips),
        ("chi equals a quarter of the Cartan 3-tensor", chi_quarter),
        ("dirac reduction rank and injectivity", dirac_reduction),
        ("cartan-dirac and gauss-dirac as fibred products", cartan_gauss_fibred),
        ("three characterizations of 2-shifted lagrangians agree", shifted_equivalence),
        ("weil double complex", weil_double_complex),
        ("multiplicative omega and theta on K", polwie_certification),
        ("AMM groupoid on SU(2)", amm_suite),
        ("(G, 0) moment map", g0_suite),
        ("quasi-poisson encode and decode", quasi_poisson),
        ("courant axioms and gauge transforms", courant_axioms),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{status} criterion {:>2}: {name} [{}] ({:.2} s)", i + 1, o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
