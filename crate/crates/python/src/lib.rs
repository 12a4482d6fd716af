use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::agnodp::audit::{exact_dp_check, swap_neighbors};
use ::agnodp::binomial;
use ::agnodp::harness::{run_experiment, ExperimentConfig};
use ::agnodp::learners::{self, item_output_probabilities};
use ::agnodp::mechanism::{exp_mech_probabilities, PrivacyBudget, SensitivitySpec};
use ::agnodp::model::{self, sample_dataset};
use ::agnodp::representation::trivial_representation;
use ::agnodp::rng::rng_from_seed;
use ::agnodp::threshold;
use ::agnodp::{
    Constants, ConstantsMode, DiscreteJointDistribution, Domain, DpError, Example, Hypothesis, HypothesisClass,
    LearnParams, UserDataset,
};

fn to_py(e: DpError) -> PyErr {
    match e {
        DpError::Parameter(_) | DpError::Config(_) | DpError::DomainMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn constants(mode: &str) -> PyResult<Constants> {
    match mode {
        "theory" => Ok(Constants::for_mode(ConstantsMode::Theory)),
        "practical" => Ok(Constants::for_mode(ConstantsMode::Practical)),
        other => Err(PyValueError::new_err(format!("mode must be 'theory' or 'practical', got {other:?}"))),
    }
}

fn params(alpha: f64, beta: f64, epsilon: f64, mode: &str) -> PyResult<LearnParams> {
    LearnParams::new(alpha, beta, epsilon, constants(mode)?).map_err(to_py)
}

fn threshold_u(h: &Hypothesis) -> usize {
    h.threshold_param().expect("threshold learners return thresholds")
}

/// Exact joint distribution over `{1..k} x {0, 1}`.
#[pyclass(name = "Distribution", module = "agnodp")]
struct PyDistribution {
    inner: DiscreteJointDistribution,
}

#[pymethods]
impl PyDistribution {
    /// Uniform marginal, labels from `f_{u_star}` flipped with probability `rho`.
    #[staticmethod]
    fn noisy_threshold(domain_size: usize, u_star: usize, rho: f64) -> PyResult<Self> {
        let d = Domain::new(domain_size).map_err(to_py)?;
        let marg = vec![1.0 / domain_size as f64; domain_size];
        let inner = DiscreteJointDistribution::noisy_threshold(d, &marg, u_star, rho).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn uniform_labels(domain_size: usize) -> PyResult<Self> {
        let d = Domain::new(domain_size).map_err(to_py)?;
        Ok(Self { inner: DiscreteJointDistribution::uniform_labels(d) })
    }

    #[staticmethod]
    fn point_mass(domain_size: usize, x: u32, y: bool) -> PyResult<Self> {
        let d = Domain::new(domain_size).map_err(to_py)?;
        Ok(Self { inner: DiscreteJointDistribution::point_mass(d, x, y).map_err(to_py)? })
    }

    /// Rows are `(Pr[x, y=0], Pr[x, y=1])` for `x = 1..k`.
    #[staticmethod]
    fn from_table(table: Vec<(f64, f64)>) -> PyResult<Self> {
        let d = Domain::new(table.len()).map_err(to_py)?;
        let probs = table.into_iter().map(|(a, b)| [a, b]).collect();
        Ok(Self { inner: DiscreteJointDistribution::new(d, probs).map_err(to_py)? })
    }

    #[getter]
    fn domain_size(&self) -> usize {
        self.inner.domain().size()
    }

    /// `(u, err)` of the best threshold.
    fn best_threshold(&self) -> (usize, f64) {
        self.inner.best_threshold()
    }

    fn threshold_error(&self, u: usize) -> PyResult<f64> {
        let h = Hypothesis::threshold(u, self.inner.domain()).map_err(to_py)?;
        model::population_error(&self.inner, &h).map_err(to_py)
    }

    /// Probability that a user with `m` samples sees more than `t` mistakes of `f_u`.
    fn threshold_user_error(&self, u: usize, t: usize, m: usize) -> PyResult<f64> {
        let h = Hypothesis::threshold(u, self.inner.domain()).map_err(to_py)?;
        model::population_user_error(&self.inner, &h, t, m).map_err(to_py)
    }

    fn sample(&self, n: usize, m: usize, seed: u64) -> PyResult<PyDataset> {
        let inner = sample_dataset(&self.inner, n, m, &mut rng_from_seed(seed)).map_err(to_py)?;
        Ok(PyDataset { inner })
    }
}

/// `n` users with `m` labelled examples each.
#[pyclass(name = "Dataset", module = "agnodp")]
struct PyDataset {
    inner: UserDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(domain_size: usize, users: Vec<Vec<(u32, bool)>>) -> PyResult<Self> {
        let d = Domain::new(domain_size).map_err(to_py)?;
        let users = users.into_iter().map(|u| u.into_iter().map(|(x, y)| Example::new(x, y)).collect()).collect();
        Ok(Self { inner: UserDataset::new(d, users).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_text(text: &str, domain_size: usize) -> PyResult<Self> {
        let d = Domain::new(domain_size).map_err(to_py)?;
        Ok(Self { inner: UserDataset::from_text(text, d).map_err(to_py)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn domain_size(&self) -> usize {
        self.inner.domain().size()
    }

    fn users(&self) -> Vec<Vec<(u32, bool)>> {
        self.inner.users().map(|u| u.iter().map(|e| (e.x, e.y)).collect()).collect()
    }

    /// Item-level mistakes of `f_u`.
    fn threshold_errors(&self, u: usize) -> PyResult<u64> {
        let h = Hypothesis::threshold(u, self.inner.domain()).map_err(to_py)?;
        Ok(model::empirical_error(&self.inner, &h).map_err(to_py)?.count)
    }

    /// Users on whom `f_u` makes more than `t` mistakes.
    fn threshold_user_errors(&self, u: usize, t: usize) -> PyResult<u64> {
        let h = Hypothesis::threshold(u, self.inner.domain()).map_err(to_py)?;
        Ok(model::user_error(&self.inner, &h, t).map_err(to_py)?.count)
    }

    fn __repr__(&self) -> String {
        format!("Dataset(domain_size={}, n={}, m={})", self.inner.domain().size(), self.inner.n(), self.inner.m())
    }
}

/// Item-level learner over thresholds; returns the chosen `u`.
#[pyfunction]
#[pyo3(signature = (data, alpha, beta, epsilon, seed, mode = "theory"))]
fn learn_item(data: &PyDataset, alpha: f64, beta: f64, epsilon: f64, seed: u64, mode: &str) -> PyResult<usize> {
    let p = params(alpha, beta, epsilon, mode)?;
    let class = HypothesisClass::thresholds(data.inner.domain());
    let rep = trivial_representation(&class);
    let out = learners::learn_item(&data.inner, &class, &rep, &p, &mut rng_from_seed(seed)).map_err(to_py)?;
    Ok(threshold_u(&out.hypothesis))
}

/// User-level learner over thresholds; returns `(u, eta_hat, t, s)`.
#[pyfunction]
#[pyo3(signature = (data, alpha, beta, epsilon, seed, mode = "theory"))]
fn learn_user(
    data: &PyDataset,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    seed: u64,
    mode: &str,
) -> PyResult<(usize, f64, usize, usize)> {
    let p = params(alpha, beta, epsilon, mode)?;
    let class = HypothesisClass::thresholds(data.inner.domain());
    let rep = trivial_representation(&class);
    let out = learners::learn_user(&data.inner, &class, &rep, &p, &mut rng_from_seed(seed)).map_err(to_py)?;
    let up = out.user_params.expect("user learner reports its thresholds");
    Ok((threshold_u(&out.hypothesis), out.eta_hat.unwrap_or(0.0), up.t, up.s))
}

/// Threshold learner; returns `(u, eta_hat, t)`.
#[pyfunction]
#[pyo3(signature = (data, alpha, beta, epsilon, seed, mode = "theory"))]
fn learn_threshold(
    data: &PyDataset,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    seed: u64,
    mode: &str,
) -> PyResult<(usize, f64, usize)> {
    let p = params(alpha, beta, epsilon, mode)?;
    let out = threshold::learn_threshold(&data.inner, &p, &mut rng_from_seed(seed)).map_err(to_py)?;
    Ok((threshold_u(&out.hypothesis), out.eta_hat, out.t))
}

/// Private estimate of the best threshold error; returns `(eta_hat, lo, hi)`.
#[pyfunction]
#[pyo3(signature = (data, alpha, beta, epsilon, seed, mode = "theory"))]
fn private_min_error(
    data: &PyDataset,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    seed: u64,
    mode: &str,
) -> PyResult<(f64, f64, f64)> {
    let c = constants(mode)?;
    let class = HypothesisClass::thresholds(data.inner.domain());
    let mut budget = PrivacyBudget::new(epsilon).map_err(to_py)?;
    let est = learners::private_min_error(
        &data.inner,
        &class,
        epsilon,
        alpha,
        beta,
        &c,
        &mut budget,
        &mut rng_from_seed(seed),
    )
    .map_err(to_py)?;
    Ok((est.eta_hat, est.interval.0, est.interval.1))
}

/// Output probabilities of the item learner over all thresholds.
#[pyfunction]
fn item_probabilities(data: &PyDataset, epsilon: f64) -> PyResult<Vec<f64>> {
    let class = HypothesisClass::thresholds(data.inner.domain());
    item_output_probabilities(&data.inner, &class, &class, epsilon).map_err(to_py)
}

/// Largest exact log-ratio of the item learner's outputs between `data`
/// and each of its swap neighbors.
#[pyfunction]
fn audit_item_exact(data: &PyDataset, epsilon: f64) -> PyResult<(f64, bool)> {
    let class = HypothesisClass::thresholds(data.inner.domain());
    let pairs: Vec<(UserDataset, UserDataset)> =
        swap_neighbors(&data.inner).map_err(to_py)?.into_iter().map(|w| (data.inner.clone(), w)).collect();
    let report =
        exact_dp_check(|z: &UserDataset| item_output_probabilities(z, &class, &class, epsilon), &pairs, epsilon)
            .map_err(to_py)?;
    Ok((report.epsilon_measured, report.violation))
}

#[pyfunction]
fn exponential_probabilities(scores: Vec<f64>, sensitivity: f64, epsilon: f64) -> PyResult<Vec<f64>> {
    let s = SensitivitySpec::new(sensitivity).map_err(to_py)?;
    exp_mech_probabilities(&scores, s, epsilon).map_err(to_py)
}

/// `Pr[Bin(m, p) > ell]`.
#[pyfunction]
fn binom_tail(m: u64, p: f64, ell: i64) -> PyResult<f64> {
    binomial::binom_tail(m, p, ell).map_err(to_py)
}

#[pyfunction]
fn binom_tv(m: u64, p: f64, q: f64) -> PyResult<f64> {
    binomial::binom_tv(m, p, q).map_err(to_py)
}

/// Runs an experiment from its JSON config and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config_json, threads = None))]
fn run_sweep(py: Python<'_>, config_json: &str, threads: Option<usize>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    py.detach(|| run_experiment(&cfg, threads).and_then(|r| r.to_csv())).map_err(to_py)
}

#[pymodule]
fn agnodp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(learn_item, m)?)?;
    m.add_function(wrap_pyfunction!(learn_user, m)?)?;
    m.add_function(wrap_pyfunction!(learn_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(private_min_error, m)?)?;
    m.add_function(wrap_pyfunction!(item_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(audit_item_exact, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(binom_tail, m)?)?;
    m.add_function(wrap_pyfunction!(binom_tv, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
