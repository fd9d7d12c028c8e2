//! Scenario files: declarations, checks and settings in JSON.

use crate::catalog::{self, error_record, GROUP_SUITES};
use crate::report::Report;
use dirac_kit::exactla::{parse_q, QMat, Subspace, Q};
use dirac_kit::grpnum::{CheckRecord, MatrixGroupChart, Settings};
use dirac_kit::qlie::{self, CatalogItem, LieAlgebra, ManinPair, MatrixLieAlgebra, QuadLieAlgebra};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario does not match the schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSettings {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum AlgebraDecl {
    Catalog { catalog: String },
    Explicit { dim: usize, brackets: Vec<(usize, usize, usize, String)>, gram: Option<Vec<Vec<String>>> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceDecl {
    pub ambient_dim: usize,
    pub basis: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GroupDecl {
    Catalog { catalog: String },
    Matrices { basis: Vec<Vec<Vec<String>>>, trace_scale: String },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckDecl {
    LieAlgebra { name: Option<String>, algebra: String },
    Quadratic { name: Option<String>, algebra: String },
    LagrangianSubalgebra {
        name: Option<String>,
        algebra: String,
        subspace: String,
        #[serde(default)]
        double: bool,
    },
    ChiQuarter { name: Option<String>, algebra: String },
    Suite { name: Option<String>, suite: String, group: String, rational: Option<usize> },
    Catalog { name: Option<String>, entry: String },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub settings: ScenarioSettings,
    #[serde(default)]
    pub algebras: BTreeMap<String, AlgebraDecl>,
    #[serde(default)]
    pub subspaces: BTreeMap<String, SubspaceDecl>,
    #[serde(default)]
    pub groups: BTreeMap<String, GroupDecl>,
    #[serde(default)]
    pub checks: Vec<CheckDecl>,
}

/// Overrides given on the command line; they take precedence over scenario settings.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
}

/// Declared Lie algebra, with an invariant form when one was given.
#[derive(Clone, Debug)]
pub struct Algebra {
    pub lie: LieAlgebra,
    pub gram: Option<QMat>,
}

/// A scenario with all references resolved.
pub struct Resolved {
    pub settings: Settings,
    pub algebras: BTreeMap<String, Algebra>,
    pub subspaces: BTreeMap<String, Subspace>,
    pub groups: BTreeMap<String, MatrixGroupChart>,
    pub checks: Vec<CheckDecl>,
}

fn rational(s: &str) -> Result<Q, ScenarioError> {
    parse_q(s).map_or_else(|| invalid(format!("`{s}` is not a rational number")), Ok)
}

fn matrix(rows: &[Vec<String>], n: usize, what: &str) -> Result<QMat, ScenarioError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return invalid(format!("{what} must be a {n}x{n} matrix"));
    }
    let parsed = rows.iter().map(|r| r.iter().map(|x| rational(x)).collect()).collect::<Result<Vec<Vec<Q>>, _>>()?;
    Ok(QMat::from_rows(n, &parsed))
}

fn check_settings(s: &Settings) -> Result<(), ScenarioError> {
    if !(1..=100_000).contains(&s.samples) {
        return invalid(format!("samples = {} is outside 1..=100000", s.samples));
    }
    if !(s.tol > 0.0 && s.tol <= 1.0) {
        return invalid(format!("tol = {} is outside (0, 1]", s.tol));
    }
    if !(1e-8..=1e-1).contains(&s.fd_step) {
        return invalid(format!("fd_step = {} is outside [1e-8, 1e-1]", s.fd_step));
    }
    Ok(())
}

/// Settings after applying overrides to scenario values and defaults.
pub fn settings(sc: &ScenarioSettings, o: &Overrides) -> Result<Settings, ScenarioError> {
    let d = Settings::default();
    let s = Settings {
        seed: o.seed.or(sc.seed).unwrap_or(d.seed),
        samples: o.samples.or(sc.samples).unwrap_or(d.samples),
        tol: o.tol.or(sc.tol).unwrap_or(d.tol),
        fd_step: o.fd_step.or(sc.fd_step).unwrap_or(d.fd_step),
        fd_tol: d.fd_tol,
    };
    check_settings(&s)?;
    Ok(s)
}

fn algebra(name: &str, decl: &AlgebraDecl) -> Result<Algebra, ScenarioError> {
    match decl {
        AlgebraDecl::Catalog { catalog } => match qlie::catalog(catalog) {
            Some(CatalogItem::Quadratic(q)) => Ok(Algebra { lie: q.lie, gram: Some(q.form.gram().clone()) }),
            Some(CatalogItem::Lie(l)) => Ok(Algebra { lie: l, gram: None }),
            Some(_) => invalid(format!("algebra `{name}`: catalog entry `{catalog}` is not a Lie algebra")),
            None => invalid(format!("algebra `{name}`: unknown catalog entry `{catalog}`")),
        },
        AlgebraDecl::Explicit { dim, brackets, gram } => {
            let n = *dim;
            if n == 0 {
                return invalid(format!("algebra `{name}` has dimension 0"));
            }
            let mut c = vec![Q::from_integer(0.into()); n * n * n];
            for (i, j, k, v) in brackets {
                if *i >= n || *j >= n || *k >= n {
                    return invalid(format!("algebra `{name}`: bracket index out of range in [{i}, {j}, {k}]"));
                }
                let v = rational(v)?;
                c[(j * n + i) * n + k] = -v.clone();
                c[(i * n + j) * n + k] = v;
            }
            let gram = gram.as_ref().map(|g| matrix(g, n, &format!("gram of `{name}`"))).transpose()?;
            Ok(Algebra { lie: LieAlgebra::from_structure_constants(n, c), gram })
        }
    }
}

fn subspace(name: &str, decl: &SubspaceDecl) -> Result<Subspace, ScenarioError> {
    let vecs = decl
        .basis
        .iter()
        .map(|v| {
            if v.len() != decl.ambient_dim {
                return invalid(format!("subspace `{name}`: basis vector of length {} in ambient dimension {}", v.len(), decl.ambient_dim));
            }
            v.iter().map(|x| rational(x)).collect()
        })
        .collect::<Result<Vec<Vec<Q>>, _>>()?;
    Subspace::span(decl.ambient_dim, &vecs).or_else(|e| invalid(format!("subspace `{name}`: {e}")))
}

fn group(name: &str, decl: &GroupDecl) -> Result<MatrixGroupChart, ScenarioError> {
    match decl {
        GroupDecl::Catalog { catalog } => MatrixGroupChart::catalog(catalog).or_else(|e| invalid(format!("group `{name}`: {e}"))),
        GroupDecl::Matrices { basis, trace_scale } => {
            let n = basis.first().map(Vec::len).unwrap_or(0);
            if n == 0 {
                return invalid(format!("group `{name}` has an empty basis"));
            }
            let mats = basis.iter().map(|m| matrix(m, n, &format!("basis of `{name}`"))).collect::<Result<Vec<_>, _>>()?;
            let alg = MatrixLieAlgebra::new(mats).or_else(|e| invalid(format!("group `{name}`: {e}")))?;
            Ok(MatrixGroupChart::new(name, alg, rational(trace_scale)?))
        }
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, kind: &str, key: &str) -> Result<&'a T, ScenarioError> {
    map.get(key).map_or_else(|| invalid(format!("unknown {kind} `{key}`")), Ok)
}

/// Parses the JSON text and resolves every declaration and reference.
pub fn resolve(text: &str, o: &Overrides) -> Result<Resolved, ScenarioError> {
    let sc: Scenario = serde_json::from_str(text)?;
    if sc.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::Version(sc.schema_version));
    }
    let settings = settings(&sc.settings, o)?;
    let algebras = sc.algebras.iter().map(|(k, v)| Ok((k.clone(), algebra(k, v)?))).collect::<Result<BTreeMap<_, _>, ScenarioError>>()?;
    let subspaces = sc.subspaces.iter().map(|(k, v)| Ok((k.clone(), subspace(k, v)?))).collect::<Result<BTreeMap<_, _>, ScenarioError>>()?;
    let groups = sc.groups.iter().map(|(k, v)| Ok((k.clone(), group(k, v)?))).collect::<Result<BTreeMap<_, _>, ScenarioError>>()?;
    for c in &sc.checks {
        match c {
            CheckDecl::LieAlgebra { algebra, .. } | CheckDecl::Quadratic { algebra, .. } | CheckDecl::ChiQuarter { algebra, .. } => {
                lookup(&algebras, "algebra", algebra)?;
            }
            CheckDecl::LagrangianSubalgebra { algebra, subspace, .. } => {
                lookup(&algebras, "algebra", algebra)?;
                lookup(&subspaces, "subspace", subspace)?;
            }
            CheckDecl::Suite { suite, group, .. } => {
                lookup(&groups, "group", group)?;
                if !GROUP_SUITES.contains(&suite.as_str()) {
                    return invalid(format!("unknown suite `{suite}`"));
                }
            }
            CheckDecl::Catalog { entry, .. } => {
                if !catalog::CATALOG.contains(&entry.as_str()) {
                    return invalid(format!("unknown catalog entry `{entry}`"));
                }
            }
        }
    }
    Ok(Resolved { settings, algebras, subspaces, groups, checks: sc.checks })
}

fn label(name: &Option<String>, default: &str) -> String {
    name.clone().unwrap_or_else(|| default.to_string())
}

fn quadratic(a: &Algebra, check: &str) -> Result<QuadLieAlgebra, CheckRecord> {
    let gram = a.gram.clone().ok_or_else(|| error_record(check, "algebra has no gram"))?;
    QuadLieAlgebra::new(a.lie.clone(), gram).map_err(|e| error_record(check, e))
}

fn run_check(r: &Resolved, c: &CheckDecl) -> Vec<CheckRecord> {
    let s = &r.settings;
    match c {
        CheckDecl::LieAlgebra { name, algebra } => {
            let check = label(name, &format!("lie_algebra.{algebra}"));
            let a = &r.algebras[algebra];
            vec![CheckRecord::exact(&check, a.lie.dim().pow(3), a.lie.validate().err().map(|e| e.to_string()))]
        }
        CheckDecl::Quadratic { name, algebra } => {
            let check = label(name, &format!("quadratic.{algebra}"));
            vec![quadratic(&r.algebras[algebra], &check).map_or_else(|e| e, |q| CheckRecord::exact(&check, q.dim().pow(3), None))]
        }
        CheckDecl::LagrangianSubalgebra { name, algebra, subspace, double } => {
            let check = label(name, &format!("lagrangian_subalgebra.{subspace}"));
            let q = match quadratic(&r.algebras[algebra], &check) {
                Ok(q) => q,
                Err(e) => return vec![e],
            };
            let d = if *double { qlie::k_plus_kbar(&q) } else { q };
            let sub = r.subspaces[subspace].clone();
            if sub.ambient() != d.dim() {
                return vec![error_record(&check, format!("subspace lives in dimension {}, algebra has dimension {}", sub.ambient(), d.dim()))];
            }
            vec![CheckRecord::exact(&check, 1, ManinPair::new(d, sub).err().map(|e| e.to_string()))]
        }
        CheckDecl::ChiQuarter { name, algebra } => {
            let check = label(name, &format!("chi_quarter.{algebra}"));
            match quadratic(&r.algebras[algebra], &check) {
                Ok(q) => {
                    let w = qlie::chi_quarter_violation(&q).map(|v| v.map(|t| format!("basis triple {t:?}")));
                    vec![w.map_or_else(|e| error_record(&check, e), |w| CheckRecord::exact(&check, q.dim().pow(3), w))]
                }
                Err(e) => vec![e],
            }
        }
        CheckDecl::Suite { name, suite, group, rational } => {
            let records = catalog::group_suite(suite, &r.groups[group], rational.unwrap_or(catalog::RATIONAL_POINTS), s).expect("suite resolved");
            match name {
                Some(n) => records.into_iter().map(|mut c| {
                    c.check = format!("{n}.{}", c.check);
                    c
                }).collect(),
                None => records,
            }
        }
        CheckDecl::Catalog { name, entry } => {
            let records = catalog::run(entry, s).expect("entry resolved").checks;
            match name {
                Some(n) => records.into_iter().map(|mut c| {
                    c.check = format!("{n}.{}", c.check);
                    c
                }).collect(),
                None => records,
            }
        }
    }
}

/// Runs the checks in declaration order.
pub fn run(r: &Resolved) -> Report {
    let mut report = Report::default();
    for c in &r.checks {
        let start = Instant::now();
        let records = run_check(r, c);
        report.push(records, start.elapsed().as_secs_f64() * 1e3);
    }
    report
}

/// Reads, resolves and runs a scenario file.
pub fn run_scenario(path: &std::path::Path, o: &Overrides) -> Result<Report, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    Ok(run(&resolve(&text, o)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_text(t: &str) -> Result<Report, ScenarioError> {
        Ok(run(&resolve(t, &Overrides { samples: Some(4), ..Overrides::default() })?))
    }

    #[test]
    fn empty_scenario_is_an_empty_pass() {
        let r = run_text(r#"{"schema_version": 1}"#).unwrap();
        assert!(r.checks.is_empty() && r.passed());
    }

    #[test]
    fn broken_jacobi_fails_with_witness() {
        let t = r#"{"schema_version": 1,
            "algebras": {"h": {"dim": 3, "brackets": [[0, 1, 2, "1"], [1, 2, 0, "1"], [2, 0, 0, "1"]]}},
            "checks": [{"op": "lie_algebra", "algebra": "h"}]}"#;
        let r = run_text(t).unwrap();
        assert!(!r.passed());
        assert!(r.checks[0].witness.as_deref().unwrap().contains("Jacobi"));
    }

    #[test]
    fn declared_algebras_and_subspaces() {
        let t = r#"{"schema_version": 1,
            "algebras": {"g": {"catalog": "su2_trace"},
                         "h": {"dim": 3, "brackets": [[0, 1, 2, "1"], [1, 2, 0, "1"], [2, 0, 1, "1"]],
                               "gram": [["-2", "0", "0"], ["0", "-2", "0"], ["0", "0", "-2"]]}},
            "subspaces": {"diag": {"ambient_dim": 6, "basis": [["1","0","0","1","0","0"], ["0","1","0","0","1","0"], ["0","0","1","0","0","1"]]},
                          "half": {"ambient_dim": 6, "basis": [["1","0","0","0","0","0"]]}},
            "checks": [
                {"op": "quadratic", "algebra": "h"},
                {"op": "chi_quarter", "algebra": "g"},
                {"op": "lagrangian_subalgebra", "algebra": "g", "subspace": "diag", "double": true},
                {"op": "lagrangian_subalgebra", "name": "not_lagrangian", "algebra": "g", "subspace": "half", "double": true}]}"#;
        let r = run_text(t).unwrap();
        let pass: Vec<bool> = r.checks.iter().map(|c| c.pass).collect();
        assert_eq!(pass, vec![true, true, true, false]);
        assert_eq!(r.checks[3].check, "not_lagrangian");
    }

    #[test]
    fn user_matrix_group() {
        let t = r#"{"schema_version": 1,
            "groups": {"K": {"basis": [[["1","0"],["0","-1"]], [["0","1"],["0","0"]], [["0","0"],["1","0"]]], "trace_scale": "1"}},
            "checks": [{"op": "suite", "suite": "polwie", "group": "K"}]}"#;
        let r = run_text(t).unwrap();
        assert!(r.passed() && !r.checks.is_empty(), "{}", r.to_text());
    }

    #[test]
    fn schema_errors() {
        for bad in [
            r#"{"schema_version": 2}"#,
            r#"{"schema_version": 1, "checks": [{"op": "lie_algebra", "algebra": "missing"}]}"#,
            r#"{"schema_version": 1, "checks": [{"op": "nope"}]}"#,
            r#"{"schema_version": 1, "settings": {"samples": 0}}"#,
            r#"{"schema_version": 1, "settings": {"fd_step": 1.0}}"#,
            r#"{"schema_version": 1, "algebras": {"g": {"dim": 2, "brackets": [[0, 5, 1, "1"]]}}}"#,
            r#"{"schema_version": 1, "subspaces": {"s": {"ambient_dim": 2, "basis": [["1/0", "1"]]}}}"#,
            r#"{"schema_version": 1, "extra": 3}"#,
            r#"not json"#,
        ] {
            assert!(resolve(bad, &Overrides::default()).is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let sc = ScenarioSettings { seed: Some(1), samples: Some(3), tol: None, fd_step: None };
        let s = settings(&sc, &Overrides { seed: Some(9), ..Overrides::default() }).unwrap();
        assert_eq!((s.seed, s.samples, s.tol), (9, 3, 1e-9));
    }
}
