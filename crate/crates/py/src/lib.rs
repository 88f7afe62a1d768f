//! Python bindings: `import pylrising`.

use lrising::contour::{census as run_census, extract_contours, MarParams, OriginRule};
use lrising::exact::{self, ExactLimit};
use lrising::sampler::{estimate_origin_minus, Schedule, DEFAULT_BURN_IN, DEFAULT_THINNING};
use lrising::verify::{self, box_model};
use lrising::{BoundaryCondition, CouplingSpec, FieldSpec, Model, Site, Spin, SpinConfig, Volume};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: lrising::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn loads<'py>(py: Python<'py>, s: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (s,))
}

fn limit(override_scale_guard: bool) -> ExactLimit {
    if override_scale_guard {
        ExactLimit::overridden()
    } else {
        ExactLimit::default()
    }
}

fn parse_bc(s: &str) -> PyResult<BoundaryCondition> {
    match s {
        "plus" | "+" => Ok(BoundaryCondition::uniform(Spin::Plus)),
        "minus" | "-" => Ok(BoundaryCondition::uniform(Spin::Minus)),
        other => Err(PyValueError::new_err(format!(
            "bc must be 'plus' or 'minus', got {other:?}"
        ))),
    }
}

fn parse_rule(s: &str) -> PyResult<OriginRule> {
    match s {
        "interior" => Ok(OriginRule::Interior),
        "volume" => Ok(OriginRule::Volume),
        other => Err(PyValueError::new_err(format!(
            "rule must be 'interior' or 'volume', got {other:?}"
        ))),
    }
}

/// Finite box centred on the origin with a long-range coupling, a uniform
/// boundary condition and an optional Gaussian field `ε h`.
#[pyclass(name = "Model", module = "pylrising", frozen)]
struct PyModel {
    inner: Model,
}

impl PyModel {
    fn config(&self, spins: Vec<i8>) -> PyResult<SpinConfig> {
        SpinConfig::from_values(self.inner.volume_arc().clone(), spins).map_err(err)
    }

    fn region(&self, sites: Vec<Vec<i64>>) -> PyResult<Volume> {
        Volume::region(self.inner.volume().dim(), sites.into_iter().map(Site::new)).map_err(err)
    }
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (sides, alpha = 3.0, j = 1.0, r_cut = 4.0, bc = "plus", epsilon = 0.0, field_seed = 0))]
    fn new(
        sides: Vec<usize>,
        alpha: f64,
        j: f64,
        r_cut: f64,
        bc: &str,
        epsilon: f64,
        field_seed: u64,
    ) -> PyResult<Self> {
        let spec = CouplingSpec::new(j, alpha, sides.len(), r_cut).map_err(err)?;
        let mut m = box_model(&sides, &spec, parse_bc(bc)?).map_err(err)?;
        if epsilon > 0.0 {
            let f = FieldSpec::GaussianIid {
                epsilon,
                seed: field_seed,
            }
            .realize(m.volume_arc().clone())
            .map_err(err)?;
            m = m.with_field(f).map_err(err)?;
        }
        Ok(PyModel { inner: m })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let spec = self.inner.spec().expect("built from a spec");
        format!(
            "Model(sites={}, d={}, alpha={}, r_cut={}, epsilon={})",
            self.inner.len(),
            spec.dim,
            spec.alpha,
            spec.r_cut,
            self.inner.field().strength()
        )
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.volume().dim()
    }

    /// Site coordinates in index order.
    fn sites(&self) -> Vec<Vec<i64>> {
        self.inner
            .volume()
            .iter()
            .map(|s| s.coords().to_vec())
            .collect()
    }

    fn origin_index(&self) -> Option<usize> {
        self.inner.volume().index_of(&Site::origin(self.dim()))
    }

    /// Raw field values `h_x` (multiply by the strength for `ε h_x`).
    fn field(&self) -> Vec<f64> {
        self.inner.field().values().to_vec()
    }

    fn energy(&self, spins: Vec<i8>) -> PyResult<f64> {
        Ok(self.inner.energy(&self.config(spins)?).map_err(err)?.total)
    }

    fn delta_single_flip(&self, spins: Vec<i8>, i: usize) -> PyResult<f64> {
        let s = self.config(spins)?;
        if i >= s.len() {
            return Err(PyValueError::new_err(format!(
                "site index {i} out of range"
            )));
        }
        Ok(self.inner.delta_single_flip(s.values(), i))
    }

    #[pyo3(signature = (beta, override_scale_guard = false))]
    fn log_partition(
        &self,
        py: Python<'_>,
        beta: f64,
        override_scale_guard: bool,
    ) -> PyResult<f64> {
        py.detach(|| exact::log_partition_with(&self.inner, beta, limit(override_scale_guard)))
            .map(|z| z.log_z)
            .map_err(err)
    }

    /// Exact `P[σ_0 = −1]`.
    #[pyo3(signature = (beta, override_scale_guard = false))]
    fn probability_minus(
        &self,
        py: Python<'_>,
        beta: f64,
        override_scale_guard: bool,
    ) -> PyResult<f64> {
        let o = Site::origin(self.dim());
        py.detach(|| exact::probability_minus(&self.inner, beta, &o, limit(override_scale_guard)))
            .map_err(err)
    }

    /// `Δ_A` for the listed sites.
    fn delta_a(&self, py: Python<'_>, beta: f64, sites: Vec<Vec<i64>>) -> PyResult<f64> {
        let a = self.region(sites)?;
        py.detach(|| exact::delta_a(&self.inner, beta, &a))
            .map(|d| d.delta)
            .map_err(err)
    }

    /// Relative error of the density-ratio identity for the flip of `sites`.
    fn identity_check(
        &self,
        py: Python<'_>,
        beta: f64,
        spins: Vec<i8>,
        sites: Vec<Vec<i64>>,
    ) -> PyResult<f64> {
        let s = self.config(spins)?;
        let a = self.region(sites)?;
        py.detach(|| exact::identity_check(&self.inner, beta, &s, &a, ExactLimit::default()))
            .map(|c| c.rel_error)
            .map_err(err)
    }

    /// Contours of a configuration as plain Python data.
    fn contours<'py>(&self, py: Python<'py>, spins: Vec<i8>) -> PyResult<Bound<'py, PyAny>> {
        let set = extract_contours(
            &self.config(spins)?,
            self.inner.boundary_condition(),
            &MarParams::default(),
        )
        .map_err(err)?;
        loads(py, &set.to_json().map_err(err)?)
    }

    /// Metropolis estimate of `P[σ_0 = −1]` as `(estimate, std_error)`.
    #[pyo3(signature = (beta, sweeps, seed, burn_in = DEFAULT_BURN_IN, thinning = DEFAULT_THINNING))]
    fn sample_origin_minus(
        &self,
        py: Python<'_>,
        beta: f64,
        sweeps: u64,
        seed: u64,
        burn_in: u64,
        thinning: u64,
    ) -> PyResult<(f64, f64)> {
        let s = Schedule::new(beta, sweeps, seed)
            .with_burn_in(burn_in)
            .with_thinning(thinning);
        let r = py
            .detach(|| estimate_origin_minus(&self.inner, &s))
            .map_err(err)?;
        Ok((r.estimate, r.std_error))
    }

    /// Monte Carlo `P̂⁻[σ_0 = −1] − P̂⁺[σ_0 = −1]`; the model must carry the
    /// plus boundary condition.
    #[pyo3(signature = (beta, sweeps, seed, replicas = 4))]
    fn boundary_gap<'py>(
        &self,
        py: Python<'py>,
        beta: f64,
        sweeps: u64,
        seed: u64,
        replicas: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let eps = self.inner.field().strength();
        let s = Schedule::new(beta, sweeps, seed);
        let g = py
            .detach(|| verify::boundary_gap(&self.inner, &s, eps, replicas))
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("p_plus", g.p_plus)?;
        d.set_item("p_minus", g.p_minus)?;
        d.set_item("gap", g.gap)?;
        d.set_item("joint_se", g.joint_se)?;
        d.set_item("z", g.z_score())?;
        Ok(d)
    }

    /// Exhaustive flip-energy check over every configuration of the volume.
    fn verify_flip_energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = py
            .detach(|| {
                let inst = verify::exhaustive_instances(
                    self.inner.volume_arc().clone(),
                    self.inner.boundary_condition(),
                    &MarParams::default(),
                )?;
                verify::verify_flip_energy_bound(&self.inner, &inst)
            })
            .map_err(err)?;
        loads(py, &r.to_json().map_err(err)?)
    }

    /// Exact Peierls check on a zero-field copy of the model.
    fn verify_peierls<'py>(&self, py: Python<'py>, betas: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let zero = FieldSpec::None
            .realize(self.inner.volume_arc().clone())
            .map_err(err)?;
        let m = self.inner.with_field(zero).map_err(err)?;
        let r = py
            .detach(|| {
                verify::verify_peierls(
                    &m,
                    &betas,
                    &[0.0],
                    1,
                    &Schedule::new(1.0, 11_000, 0),
                    ExactLimit::default(),
                )
            })
            .map_err(err)?;
        loads(py, &r.report.to_json().map_err(err)?)
    }
}

/// Origin-contour census: one dict per length with `count` and `covers`.
#[pyfunction]
#[pyo3(signature = (d, ns, ls, rule = "interior"))]
fn census<'py>(
    py: Python<'py>,
    d: usize,
    ns: Vec<usize>,
    ls: Vec<u32>,
    rule: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rule = parse_rule(rule)?;
    let table = py
        .detach(|| run_census(d, &ns, None, &ls, rule, &MarParams::default()))
        .map_err(err)?;
    table
        .into_iter()
        .map(|(row, _)| {
            let out = PyDict::new(py);
            out.set_item("n", row.n)?;
            out.set_item("count", row.count)?;
            out.set_item("covers", row.covers)?;
            Ok(out)
        })
        .collect()
}

/// `2 exp(−λ² / (8 ε² k))`.
#[pyfunction]
fn concentration_bound(lambda: f64, epsilon: f64, k: usize) -> f64 {
    verify::concentration_bound(lambda, epsilon, k)
}

#[pyfunction]
fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    lrising::rng::derive_seed(base, label, index)
}

#[pymodule]
fn pylrising(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", lrising::VERSION)?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(census, m)?)?;
    m.add_function(wrap_pyfunction!(concentration_bound, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
