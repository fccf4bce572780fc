//! Python bindings: theories, expressions, both derivations, property checks
//! and the randomized oracle. Structured results cross the boundary as JSON
//! strings.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyNotImplementedError, PyValueError};
use pyo3::prelude::*;

use emt_core::canon::{canonicalize, difference, equal};
use emt_core::dsl::{expand_defs, parse, render, Format, Program};
use emt_core::expr::json::parse_rational;
use emt_core::hilbert::{hilbert_stages, HilbertOptions, Stage};
use emt_core::variational::{noether_emt, noether_identity_residual, program_rules, rules_with_defaults};
use emt_core::verify::oracle::{oracle_equal, OracleOptions};
use emt_core::verify::props::{check_property, CheckContext, Mode, Property};
use emt_core::{corpus, Error, Registry, Sym, TensorExpr};

create_exception!(emt_py, EmtError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::Unsupported(m) => PyNotImplementedError::new_err(m),
        Error::Usage(m) => PyValueError::new_err(m),
        e => EmtError::new_err(e.to_string()),
    }
}

fn json_text<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

/// A sum of tensor monomials with rational coefficients.
#[pyclass(name = "Expr", module = "emt_py", frozen)]
#[derive(Clone)]
pub struct PyExpr {
    inner: TensorExpr,
}

impl From<TensorExpr> for PyExpr {
    fn from(inner: TensorExpr) -> Self {
        PyExpr { inner }
    }
}

#[pymethods]
impl PyExpr {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        TensorExpr::from_json(text).map(Into::into).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    /// Sorted free index names.
    fn free_indices(&self) -> Vec<String> {
        self.inner.free_indices().iter().map(|i| i.to_string()).collect()
    }

    /// Values for named parameters, each an integer or a `p/q` string.
    fn substitute(&self, values: BTreeMap<String, String>) -> PyResult<Self> {
        let mut vals = BTreeMap::new();
        for (k, v) in values {
            vals.insert(Sym::from(k), parse_rational(&v).map_err(err)?);
        }
        Ok(self.inner.substitute_params(&vals).into())
    }

    fn fix_dim(&self, n: u32) -> Self {
        self.inner.fix_dim(n).into()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        render(&self.inner, Format::Dsl)
    }

    fn __repr__(&self) -> String {
        format!("Expr({} terms)", self.inner.len())
    }

    fn __add__(&self, other: &PyExpr) -> Self {
        (self.inner.clone() + other.inner.clone()).into()
    }

    fn __sub__(&self, other: &PyExpr) -> Self {
        (self.inner.clone() - other.inner.clone()).into()
    }

    fn __neg__(&self) -> Self {
        (-self.inner.clone()).into()
    }
}

/// Field declarations, parameters, macros and a Lagrangian.
#[pyclass(name = "Theory", module = "emt_py", frozen)]
#[derive(Clone)]
pub struct PyTheory {
    program: Program,
}

impl PyTheory {
    fn registry(&self) -> Registry {
        self.program.registry()
    }
}

#[pymethods]
impl PyTheory {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        Ok(PyTheory { program: parse(source).map_err(err)? })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)?;
        PyTheory::new(&text)
    }

    /// One of the bundled theories: kg, em, em_bessel_hagen, fierz_pauli,
    /// gauss_bonnet.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        let program = match name {
            "kg" => corpus::kg(),
            "em" => corpus::em(),
            "em_bessel_hagen" => corpus::em_bessel_hagen(),
            "fierz_pauli" => corpus::fierz_pauli(),
            "gauss_bonnet" => corpus::gauss_bonnet(),
            other => return Err(PyKeyError::new_err(other.to_string())),
        };
        Ok(PyTheory { program })
    }

    /// This theory with further declarations, typically `delta` rules.
    fn extend(&self, source: &str) -> PyResult<Self> {
        Ok(PyTheory { program: self.program.extend(source).map_err(err)? })
    }

    #[getter]
    fn params(&self) -> Vec<String> {
        self.program.params.iter().map(|p| p.to_string()).collect()
    }

    /// The Lagrangian with macros expanded, canonical.
    fn lagrangian(&self) -> PyResult<PyExpr> {
        expand_defs(&self.program).map(Into::into).map_err(err)
    }

    fn parse_expr(&self, text: &str) -> PyResult<PyExpr> {
        self.program.parse_expr(text).map(Into::into).map_err(err)
    }

    fn canonicalize(&self, e: &PyExpr) -> PyResult<PyExpr> {
        canonicalize(&e.inner, &self.registry()).map(Into::into).map_err(err)
    }

    fn equal(&self, a: &PyExpr, b: &PyExpr) -> PyResult<bool> {
        equal(&a.inner, &b.inner, &self.registry()).map_err(err)
    }

    /// Canonical `a - b` with the free indices of `b` renamed to match `a`.
    fn difference(&self, a: &PyExpr, b: &PyExpr) -> PyResult<PyExpr> {
        difference(&a.inner, &b.inner, &self.registry()).map(Into::into).map_err(err)
    }

    /// Translation current `T^{ga rh}` using the declared `delta` rules and
    /// the canonical rule for every other field.
    fn noether_emt(&self, py: Python<'_>) -> PyResult<PyExpr> {
        let p = &self.program;
        py.allow_threads(|| {
            let reg = p.registry();
            let l = expand_defs(p)?;
            let rules = rules_with_defaults(&l, &program_rules(p)?, &reg)?;
            noether_emt(&l, &rules, &reg)
        })
        .map(Into::into)
        .map_err(err)
    }

    /// Zero exactly when the variation rules leave the action invariant.
    fn noether_identity_residual(&self) -> PyResult<PyExpr> {
        let p = &self.program;
        let reg = p.registry();
        let run = || {
            let l = expand_defs(p)?;
            let rules = rules_with_defaults(&l, &program_rules(p)?, &reg)?;
            noether_identity_residual(&l, &rules, &reg)
        };
        run().map(Into::into).map_err(err)
    }

    /// Metric variation at the flat metric. `stage` selects an intermediate
    /// result: promoted, pruned, varied or flat.
    #[pyo3(signature = (exact = false, stage = "flat"))]
    fn hilbert_emt(&self, py: Python<'_>, exact: bool, stage: &str) -> PyResult<PyExpr> {
        let stage: Stage = stage.parse().map_err(err)?;
        let opts = if exact { HilbertOptions::exact() } else { HilbertOptions::default() };
        let p = &self.program;
        py.allow_threads(|| hilbert_stages(p, opts).map(|s| s.get(stage).clone()))
            .map(Into::into)
            .map_err(err)
    }

    /// Property reports as a JSON list. Properties: symmetric, traceless,
    /// gauge_invariant, conserved.
    #[pyo3(signature = (t, properties, numeric = false, trials = 20, seed = 1))]
    fn check(&self, t: &PyExpr, properties: Vec<String>, numeric: bool, trials: usize, seed: u64) -> PyResult<String> {
        let mut c = CheckContext::new(self.registry());
        c.mode = if numeric { Mode::Numeric } else { Mode::Symbolic };
        c.oracle = OracleOptions { trials, seed, ..OracleOptions::default() };
        c.gauge_rule = self.program.gauge_rules().map_err(err)?.into_iter().next();
        let mut out = Vec::new();
        for s in &properties {
            let prop = Property::parse(s).map_err(err)?;
            out.push(check_property(&t.inner, prop, &c).map_err(err)?);
        }
        Ok(json_text(&out))
    }

    /// Randomized exact comparison; the report is JSON.
    #[pyo3(signature = (a, b, trials = 20, seed = 1, degree = 4))]
    fn oracle_compare(&self, py: Python<'_>, a: &PyExpr, b: &PyExpr, trials: usize, seed: u64, degree: u32) -> PyResult<String> {
        let reg = self.registry();
        let opts = OracleOptions { trials, seed, degree };
        py.allow_threads(|| oracle_equal(&a.inner, &b.inner, &reg, &opts)).map(|r| r.to_json()).map_err(err)
    }
}

/// Bundled reference tensors: `em` (Maxwell) or `gauss_bonnet`.
#[pyfunction]
fn reference(name: &str) -> PyResult<PyExpr> {
    match name {
        "em" => corpus::em_emt(),
        "gauss_bonnet" => corpus::gb_emt(),
        other => return Err(PyKeyError::new_err(other.to_string())),
    }
    .map(Into::into)
    .map_err(err)
}

/// Structured comparison of the curvature-squared tensor against its
/// reference, as JSON.
#[pyfunction]
#[pyo3(signature = (trials = 20, seed = 1, degree = 4))]
fn discrepancy_report(py: Python<'_>, trials: usize, seed: u64, degree: u32) -> PyResult<String> {
    let opts = OracleOptions { trials, seed, degree };
    py.allow_threads(|| emt_core::hilbert::report::discrepancy_report(&opts)).map(|r| json_text(&r)).map_err(err)
}

#[pymodule]
fn emt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyTheory>()?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(discrepancy_report, m)?)?;
    m.add("EmtError", m.py().get_type_bound::<EmtError>())?;
    Ok(())
}
