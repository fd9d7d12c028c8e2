//! Named suites runnable with default data.

use crate::report::Report;
use dirac_kit::grpnum::{self, CheckRecord, GrpError, MatrixGroupChart, Settings};
use dirac_kit::qlie;
use dirac_kit::weil::{self, WeilAlgebra};
use std::time::Instant;

pub const CATALOG: &[&str] = &["polwie", "amm", "arrows", "gauss_cartan", "g0_moment", "luwei", "weil_sl2", "doubles"];

/// Rational points used by the exact parts of the group suites.
pub const RATIONAL_POINTS: usize = 20;

/// Appends `[chart]` to each record name.
pub fn tagged(records: Vec<CheckRecord>, chart: &str) -> Vec<CheckRecord> {
    records.into_iter().map(|mut r| {
        r.check = format!("{}[{chart}]", r.check);
        r
    }).collect()
}

/// A failing record carrying an error message.
pub fn error_record(check: &str, err: impl std::fmt::Display) -> CheckRecord {
    CheckRecord::exact(check, 0, Some(err.to_string()))
}

fn chart(name: &str) -> MatrixGroupChart {
    MatrixGroupChart::catalog(name).expect("catalog chart")
}

/// Runs a group-level suite on one chart; errors become failing records.
pub fn group_suite(suite: &str, c: &MatrixGroupChart, rational: usize, s: &Settings) -> Option<Vec<CheckRecord>> {
    let result: Result<Vec<CheckRecord>, GrpError> = match suite {
        "polwie" => grpnum::polwie_suite(c, s),
        "amm" => grpnum::amm_suite(c, s),
        "arrows" => grpnum::arrow_groupoid_suite(c, s),
        "ca_groupoid" => grpnum::ca_groupoid_maps(c, s),
        "gauss_cartan" => grpnum::gauss_cartan_fibred(c, rational, s),
        "g0_moment" => grpnum::g0_moment_map_suite(c, rational, s),
        "luwei" => grpnum::luwei_check(c, s),
        _ => return None,
    };
    Some(tagged(result.unwrap_or_else(|e| vec![error_record(suite, e)]), &c.name))
}

pub const GROUP_SUITES: &[&str] = &["polwie", "amm", "arrows", "ca_groupoid", "gauss_cartan", "g0_moment", "luwei"];

fn exact_record<E: std::fmt::Display>(check: &str, points: usize, r: Result<Option<String>, E>) -> CheckRecord {
    match r {
        Ok(w) => CheckRecord::exact(check, points, w),
        Err(e) => error_record(check, e),
    }
}

/// The `doubles` suite: round trips through the Drinfeld double.
pub fn doubles(s: &Settings) -> Vec<CheckRecord> {
    let mut rng = s.rng(71);
    let count = 25;
    let mut out = vec![exact_record("doubles.round_trip", count + 1, qlie::double_round_trips(count, &mut rng))];
    for (name, g) in [("sl2", qlie::sl2_trace()), ("su2", qlie::su2_trace())] {
        let r = qlie::chi_quarter_violation(&g).map(|v| v.map(|t| format!("basis triple {t:?}")));
        out.push(exact_record(&format!("doubles.chi_quarter[{name}]"), 27, r));
    }
    out
}

/// The `weil_sl2` suite: double-complex identities and closedness against invariance.
pub fn weil_sl2(s: &Settings) -> Vec<CheckRecord> {
    let mut rng = s.rng(72);
    let g = qlie::sl2_trace();
    let w = WeilAlgebra::new(g.lie.clone());
    let count = 100;
    let mut out = vec![exact_record("weil.double_complex[sl2]", count, weil::double_complex_identities(&w, count, 3, &mut rng))];
    let r = weil::closedness_matches_invariance(&w, &[g.form.gram().clone()], 50, &mut rng).map(|(_, w)| w);
    out.push(exact_record("weil.closed_iff_invariant[sl2]", 50, r));
    out
}

/// Runs a catalog entry with the given settings.
pub fn run(name: &str, s: &Settings) -> Option<Report> {
    let start = Instant::now();
    let records = match name {
        "doubles" => doubles(s),
        "weil_sl2" => weil_sl2(s),
        "polwie" => ["sl2", "su2", "torus2"].iter().flat_map(|c| group_suite("polwie", &chart(c), 0, s).expect("suite")).collect(),
        "amm" => ["su2"].iter().flat_map(|c| group_suite("amm", &chart(c), 0, s).expect("suite")).collect(),
        "arrows" => ["sl2", "su2"]
            .iter()
            .flat_map(|c| {
                let c = chart(c);
                let mut r = group_suite("arrows", &c, 0, s).expect("suite");
                r.extend(group_suite("ca_groupoid", &c, 0, s).expect("suite"));
                r
            })
            .collect(),
        "gauss_cartan" => ["sl2", "su2"].iter().flat_map(|c| group_suite("gauss_cartan", &chart(c), RATIONAL_POINTS, s).expect("suite")).collect(),
        "g0_moment" => group_suite("g0_moment", &chart("sl2"), RATIONAL_POINTS, s).expect("suite"),
        "luwei" => group_suite("luwei", &chart("sl2"), 0, s).expect("suite"),
        _ => return None,
    };
    let mut report = Report::default();
    report.push(records, start.elapsed().as_secs_f64() * 1e3);
    Some(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Settings {
        Settings { samples: 4, ..Settings::default() }
    }

    #[test]
    fn every_catalog_entry_runs_and_passes() {
        for name in CATALOG {
            let r = run(name, &quick()).unwrap();
            assert!(!r.checks.is_empty(), "{name}");
            assert!(r.passed(), "{name}: {}", r.to_text());
        }
        assert!(run("nope", &quick()).is_none());
    }

    #[test]
    fn abelian_polwie_residuals_are_rounding_level() {
        let r = group_suite("polwie", &chart("torus2"), 0, &quick()).unwrap();
        for c in &r {
            assert!(c.max_residual < 1e-10, "{c:?}");
        }
    }

    #[test]
    fn unsupported_chart_becomes_failing_record() {
        let r = group_suite("luwei", &chart("su2"), 0, &quick()).unwrap();
        assert_eq!(r.len(), 1);
        assert!(!r[0].pass && r[0].witness.as_deref().unwrap().contains("not available"));
    }
}
