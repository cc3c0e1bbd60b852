//! Python bindings for the `setfn` workbench: parsing and canonical
//! printing, well-formedness reports, axiom lookup, proof checking, and
//! finite-universe auditing.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use setfn::kernel;
use setfn::parser;
use setfn::syntax::Registry;
use setfn::theory::AxiomId;

fn value_err(msg: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(msg.to_string())
}

/// Parses a formula and returns its canonical spelling.
#[pyfunction]
fn canonical(formula: &str) -> PyResult<String> {
    let reg = Registry::builtin();
    let f = parser::parse_formula(formula, &reg).map_err(value_err)?;
    Ok(parser::print_formula(&f))
}

/// Parses a formula and returns its well-formedness violations (empty list
/// means the formula is well formed).
#[pyfunction]
fn wff_violations(formula: &str) -> PyResult<Vec<String>> {
    let reg = Registry::builtin();
    let f = parser::parse_formula(formula, &reg).map_err(value_err)?;
    let report = setfn::syntax::check_wff(&f, &reg);
    Ok(report.violations.iter().map(|v| v.to_string()).collect())
}

/// The names of the axioms, in declaration order.
#[pyfunction]
fn axiom_names() -> Vec<String> {
    AxiomId::ALL.iter().map(|id| id.name().to_string()).collect()
}

/// The canonical text of the named axiom.
#[pyfunction]
fn axiom_text(name: &str) -> PyResult<String> {
    let id = AxiomId::from_name(name)
        .ok_or_else(|| value_err(format!("unknown axiom `{name}`")))?;
    Ok(parser::print_formula(setfn::theory::axiom(id)))
}

/// Checks a proof script; returns `(accepted, detail)` where `detail` is
/// empty on acceptance and explains the rejected step otherwise.
#[pyfunction]
fn check_script(src: &str) -> PyResult<(bool, String)> {
    let script = kernel::parse_script(src).map_err(value_err)?;
    match kernel::check_proof(&script) {
        kernel::Verdict::Accepted => Ok((true, String::new())),
        kernel::Verdict::Rejected { step, reason } => {
            Ok((false, format!("step {step}: {reason}")))
        }
    }
}

/// Evaluates a formula in the universe described by `universe_src`.
#[pyfunction]
fn eval_in_universe(universe_src: &str, formula: &str) -> PyResult<bool> {
    let uni = setfn::model::parse_tfu(universe_src).map_err(value_err)?;
    let reg = uni.registry();
    let f = parser::parse_formula(formula, &reg).map_err(value_err)?;
    uni.eval_sentence(&f).map_err(value_err)
}

/// Audits every axiom in the universe; returns `(name, holds)` pairs.
#[pyfunction]
fn audit_universe(universe_src: &str) -> PyResult<Vec<(String, bool)>> {
    let uni = setfn::model::parse_tfu(universe_src).map_err(value_err)?;
    let report = setfn::model::audit_axioms(&uni).map_err(value_err)?;
    Ok(report
        .into_iter()
        .map(|(id, holds)| (id.name().to_string(), holds))
        .collect())
}

#[pymodule]
fn setfn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(wff_violations, m)?)?;
    m.add_function(wrap_pyfunction!(axiom_names, m)?)?;
    m.add_function(wrap_pyfunction!(axiom_text, m)?)?;
    m.add_function(wrap_pyfunction!(check_script, m)?)?;
    m.add_function(wrap_pyfunction!(eval_in_universe, m)?)?;
    m.add_function(wrap_pyfunction!(audit_universe, m)?)?;
    Ok(())
}
