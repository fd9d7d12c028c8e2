//! End-to-end flows that cross module boundaries.

use dirac_kit::courant::{self, VerifyMode};
use dirac_kit::exactla::{LagClass, QForm};
use dirac_kit::grpnum::{self, MatrixGroupChart, Settings};
use dirac_kit::qlie;
use dirac_kit::relations;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn seeded_suites_are_reproducible() {
    let c = MatrixGroupChart::catalog("sl2").unwrap();
    let s = Settings { samples: 5, ..Settings::default() };
    let a = grpnum::g0_moment_map_suite(&c, 2, &s).unwrap();
    let b = grpnum::g0_moment_map_suite(&c, 2, &s).unwrap();
    assert_eq!(a, b);
    let other = grpnum::g0_moment_map_suite(&c, 2, &Settings { seed: 7, ..s }).unwrap();
    let float = |r: &[grpnum::CheckRecord]| r.iter().find(|x| x.check == "g0.delta_sigma").unwrap().max_residual;
    assert_ne!(float(&a), float(&other));
}

#[test]
fn exact_fibred_products_are_the_cartan_and_gauss_displays() {
    let alg = qlie::sl2_matrix();
    let gram = alg.trace_gram(&qlie::trace_scale("sl2"));
    let gf = QForm::new(gram.clone()).unwrap();
    let form = QForm::hyperbolic(3);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for target in [qlie::diagonal(3), qlie::gauss_s_sl2()] {
        assert_eq!(gf.direct_sum(&gf.neg()).lagrangian_class(&target).unwrap(), LagClass::Lagrangian);
        for _ in 0..4 {
            let g = grpnum::rational_sl2(&mut rng);
            let reduced = grpnum::reduce_arrows_exact(&alg, &gram, &g, &target).unwrap();
            assert_eq!(reduced, grpnum::cartan_display_exact(&alg, &gram, &g, &target));
            assert_eq!(form.lagrangian_class(&reduced).unwrap(), LagClass::Lagrangian);
        }
    }
}

#[test]
fn standard_bialgebra_survives_the_double() {
    let b = qlie::standard_bialgebra_sl2();
    let t = qlie::double_triple(&b).unwrap();
    assert_eq!(qlie::quasi_bialgebra_from_triple(&t).unwrap(), b);
    assert_eq!(qlie::drinfeld_double(&b).unwrap().dim(), 6);
}

#[test]
fn quasi_poisson_structures_on_every_chart_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for n in 1..=3 {
        let (pi, rho, b) = courant::random_qpoisson_sl2(n, &mut rng);
        assert!(courant::qpoisson_conditions(&pi, &rho, &b).unwrap());
        let (ca, frame) = courant::qpoisson_encode(&pi, &rho, &b).unwrap();
        assert!(courant::verify_dirac(&ca, &frame, VerifyMode::Exact).unwrap().ok(), "chart dimension {n}");
        let back = courant::qpoisson_decode(&frame, n, 3, 3, 5).unwrap();
        assert_eq!((back.pi, back.rho), (pi, rho));
    }
}

#[test]
fn random_fibred_pairs_give_dirac_structures() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10 {
        let p = relations::random_fibered_pair(&mut rng);
        let r = relations::reduce(&p).unwrap();
        assert!(r.generated && r.injective && r.lagrangian);
        assert_eq!(2 * r.l.dim(), p.q1.dim() + p.q2.dim());
    }
}
