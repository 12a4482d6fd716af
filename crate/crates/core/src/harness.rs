//! Experiment configuration, trial sweeps, CSV output and plot scripts.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};
use crate::learners::{learn_item, learn_user};
use crate::model::{
    empirical_error, population_error, sample_dataset, threshold_error_counts, DiscreteJointDistribution, Domain,
    Hypothesis, HypothesisClass, UserDataset,
};
use crate::params::{Constants, ConstantsMode, LearnParams};
use crate::representation::trivial_representation;
use crate::rng::{derive_rng, derive_seed, DpRng};
use crate::threshold::learn_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Item,
    User,
    Threshold,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Item => "item",
            LearnerKind::User => "user",
            LearnerKind::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Labels follow `f_{u_star}`, each flipped independently with probability `rho`.
    NoisyThreshold {
        u_star: usize,
        rho: f64,
        /// Marginal over `x = 1..=|X|`; uniform when absent.
        #[serde(default)]
        marginal: Option<Vec<f64>>,
    },
    UniformLabel,
    PointMass {
        x: u32,
        y: bool,
    },
    /// Row `x - 1` holds `[Pr[x, y=0], Pr[x, y=1]]`.
    Custom {
        table: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub n: Option<Vec<usize>>,
    #[serde(default)]
    pub m: Option<Vec<usize>>,
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
}

fn default_mode() -> ConstantsMode {
    ConstantsMode::Theory
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub learner: LearnerKind,
    pub domain_size: usize,
    pub distribution: DistributionSpec,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub constants_mode: ConstantsMode,
    /// Overrides the practical-mode slack multiplier.
    #[serde(default)]
    pub slack_scale: Option<f64>,
    #[serde(default)]
    pub sweep: SweepAxes,
    /// Adds a `wall_ms` column; off by default so output is reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
}

/// One point of the cartesian sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

fn config_err(msg: impl Into<String>) -> DpError {
    DpError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn constants(&self) -> Result<Constants> {
        match (self.constants_mode, self.slack_scale) {
            (ConstantsMode::Practical, Some(s)) => Constants::practical(s).map_err(|e| config_err(e.to_string())),
            (ConstantsMode::Theory, Some(_)) => Err(config_err("slack_scale only applies in practical mode")),
            (mode, None) => Ok(Constants::for_mode(mode)),
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.domain_size).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        self.domain()?;
        self.constants()?;
        generate_distribution(&self.distribution, self.domain()?)?;
        let axes = [
            ("n", self.sweep.n.as_ref().map(Vec::len)),
            ("m", self.sweep.m.as_ref().map(Vec::len)),
            ("epsilon", self.sweep.epsilon.as_ref().map(Vec::len)),
            ("alpha", self.sweep.alpha.as_ref().map(Vec::len)),
        ];
        for (name, len) in axes {
            if len == Some(0) {
                return Err(config_err(format!("sweep axis {name} is empty")));
            }
        }
        for p in self.sweep_points() {
            if p.n == 0 || p.m == 0 {
                return Err(config_err(format!("sweep point {}: n and m must be at least 1", p.index)));
            }
            if self.learner == LearnerKind::Item && p.m != 1 {
                return Err(config_err(format!("item learner needs m = 1, sweep point {} has m = {}", p.index, p.m)));
            }
            self.params_at(&p)?;
        }
        Ok(())
    }

    pub fn params_at(&self, p: &SweepPoint) -> Result<LearnParams> {
        LearnParams::new(p.alpha, self.beta, p.epsilon, self.constants()?).map_err(|e| config_err(e.to_string()))
    }

    /// Cartesian product of the axes, `n` outermost and `alpha` innermost.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let ns = self.sweep.n.clone().unwrap_or_else(|| vec![self.n]);
        let ms = self.sweep.m.clone().unwrap_or_else(|| vec![self.m]);
        let es = self.sweep.epsilon.clone().unwrap_or_else(|| vec![self.epsilon]);
        let als = self.sweep.alpha.clone().unwrap_or_else(|| vec![self.alpha]);
        let mut out = Vec::new();
        for &n in &ns {
            for &m in &ms {
                for &epsilon in &es {
                    for &alpha in &als {
                        out.push(SweepPoint { index: out.len(), n, m, epsilon, alpha });
                    }
                }
            }
        }
        out
    }

    /// The config with sweep axes removed and the base point replaced.
    pub fn single_point(&self, p: &SweepPoint) -> Self {
        Self { n: p.n, m: p.m, epsilon: p.epsilon, alpha: p.alpha, sweep: SweepAxes::default(), ..self.clone() }
    }
}

/// Exact joint table for a distribution spec.
pub fn generate_distribution(spec: &DistributionSpec, domain: Domain) -> Result<DiscreteJointDistribution> {
    let res = match spec {
        DistributionSpec::NoisyThreshold { u_star, rho, marginal } => {
            let uniform;
            let marg = match marginal {
                Some(v) => v.as_slice(),
                None => {
                    uniform = vec![1.0 / domain.size() as f64; domain.size()];
                    &uniform
                }
            };
            DiscreteJointDistribution::noisy_threshold(domain, marg, *u_star, *rho)
        }
        DistributionSpec::UniformLabel => Ok(DiscreteJointDistribution::uniform_labels(domain)),
        DistributionSpec::PointMass { x, y } => DiscreteJointDistribution::point_mass(domain, *x, *y),
        DistributionSpec::Custom { table } => DiscreteJointDistribution::new(domain, table.clone()),
    };
    res.map_err(|e| config_err(format!("distribution: {e}")))
}

/// Runs one learner over the threshold class of `z`'s domain.
pub fn run_learner(kind: LearnerKind, z: &UserDataset, params: &LearnParams, rng: &mut DpRng) -> Result<Hypothesis> {
    match kind {
        LearnerKind::Threshold => Ok(learn_threshold(z, params, rng)?.hypothesis),
        LearnerKind::Item | LearnerKind::User => {
            let class = HypothesisClass::thresholds(z.domain());
            let rep = trivial_representation(&class);
            let out = if kind == LearnerKind::Item {
                learn_item(z, &class, &rep, params, rng)?
            } else {
                learn_user(z, &class, &rep, params, rng)?
            };
            Ok(out.hypothesis)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: SweepPoint,
    pub trial: usize,
    pub status: TrialStatus,
    pub hypothesis: Option<Hypothesis>,
    /// Item error of the output minus the best threshold's, on the sample.
    pub empirical_excess: Option<f64>,
    /// `err_D(h) - inf_c err_D(c)` from the exact table.
    pub population_excess: Option<f64>,
    pub success: bool,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub point: SweepPoint,
    pub trials: usize,
    pub success_rate: f64,
    /// Mean population excess over feasible trials.
    pub mean_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// Fixed CSV columns; `wall_ms` is appended when timing is recorded.
pub const CSV_COLUMNS: [&str; 17] = [
    "row_type",
    "sweep",
    "trial",
    "learner",
    "mode",
    "n",
    "m",
    "epsilon",
    "alpha",
    "beta",
    "status",
    "hypothesis",
    "empirical_excess",
    "population_excess",
    "success",
    "success_rate",
    "mean_excess",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Runs every trial of every sweep point; `threads` of `None` uses the
/// global pool. Output does not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    config.validate()?;
    let domain = config.domain()?;
    let dist = generate_distribution(&config.distribution, domain)?;
    let (_, best) = dist.best_threshold();
    let points = config.sweep_points();
    let jobs: Vec<(SweepPoint, usize)> = points.iter().flat_map(|p| (0..config.trials).map(move |t| (*p, t))).collect();
    let run = || -> Result<Vec<TrialRecord>> {
        jobs.par_iter().map(|(p, t)| run_trial(config, &dist, best, p, *t)).collect()
    };
    let mut records = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| config_err(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    records.sort_by_key(|r| (r.point.index, r.trial));
    let aggregates = points
        .iter()
        .map(|p| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.point.index == p.index).collect();
            let successes = rows.iter().filter(|r| r.success).count();
            let ok: Vec<f64> = rows.iter().filter_map(|r| r.population_excess).collect();
            AggregateRecord {
                point: *p,
                trials: rows.len(),
                success_rate: successes as f64 / rows.len() as f64,
                mean_excess: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
            }
        })
        .collect();
    Ok(ExperimentResult { config: config.clone(), records, aggregates })
}

fn run_trial(
    config: &ExperimentConfig,
    dist: &DiscreteJointDistribution,
    best: f64,
    p: &SweepPoint,
    trial: usize,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let mut rng = derive_rng(config.seed, &[p.index as u64, trial as u64]);
    let params = config.params_at(p)?;
    let z = sample_dataset(dist, p.n, p.m, &mut rng)?;
    let out = run_learner(config.learner, &z, &params, &mut rng);
    let wall = config.record_wall_time.then(|| start.elapsed().as_secs_f64() * 1e3);
    match out {
        Ok(h) => {
            let pop = population_error(dist, &h)? - best;
            let min_emp = *threshold_error_counts(&z).iter().min().expect("nonempty") as f64;
            let total = z.entries().len() as f64;
            let emp = empirical_error(&z, &h)?.count as f64 / total - min_emp / total;
            Ok(TrialRecord {
                point: *p,
                trial,
                status: TrialStatus::Ok,
                hypothesis: Some(h),
                empirical_excess: Some(emp),
                population_excess: Some(pop),
                success: pop <= p.alpha,
                wall_ms: wall,
            })
        }
        Err(DpError::Infeasible { .. }) => Ok(TrialRecord {
            point: *p,
            trial,
            status: TrialStatus::Infeasible,
            hypothesis: None,
            empirical_excess: None,
            population_excess: None,
            success: false,
            wall_ms: wall,
        }),
        Err(e) => Err(e),
    }
}

impl ExperimentResult {
    pub fn header(&self) -> Vec<&'static str> {
        let mut h = CSV_COLUMNS.to_vec();
        if self.config.record_wall_time {
            h.push("wall_ms");
        }
        h
    }

    fn point_fields(&self, p: &SweepPoint) -> [String; 7] {
        let mode = match self.config.constants_mode {
            ConstantsMode::Theory => "theory",
            ConstantsMode::Practical => "practical",
        };
        [
            self.config.learner.name().to_string(),
            mode.to_string(),
            p.n.to_string(),
            p.m.to_string(),
            p.epsilon.to_string(),
            p.alpha.to_string(),
            self.config.beta.to_string(),
        ]
    }

    /// Trial rows in `(sweep, trial)` order, then one aggregate row per point.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| DpError::Io(e.to_string());
        w.write_record(self.header()).map_err(io)?;
        for r in &self.records {
            let mut row = vec!["trial".to_string(), r.point.index.to_string(), r.trial.to_string()];
            row.extend(self.point_fields(&r.point));
            row.push(match r.status {
                TrialStatus::Ok => "ok".into(),
                TrialStatus::Infeasible => "infeasible".into(),
            });
            row.push(r.hypothesis.as_ref().map_or_else(String::new, |h| h.to_string()));
            row.push(fmt_opt(r.empirical_excess));
            row.push(fmt_opt(r.population_excess));
            row.push(if r.success { "1" } else { "0" }.into());
            row.push(String::new());
            row.push(String::new());
            if self.config.record_wall_time {
                row.push(fmt_opt(r.wall_ms));
            }
            w.write_record(&row).map_err(io)?;
        }
        for a in &self.aggregates {
            let mut row = vec!["aggregate".to_string(), a.point.index.to_string(), String::new()];
            row.extend(self.point_fields(&a.point));
            row.extend([String::new(), String::new(), String::new(), String::new(), String::new()]);
            row.push(a.success_rate.to_string());
            row.push(fmt_opt(a.mean_excess));
            if self.config.record_wall_time {
                row.push(String::new());
            }
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| DpError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

const AXES: [&str; 4] = ["n", "m", "epsilon", "alpha"];

/// Writes a gnuplot script plotting success rate and mean excess error of
/// the aggregate rows in `csv_path` against the swept axis. Returns the script.
pub fn emit_plot_script(csv_path: &Path, script_path: &Path) -> Result<String> {
    let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| DpError::Io(format!("{}: {e}", csv_path.display())))?;
    let header = rdr.headers().map_err(|e| DpError::Io(e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DpError::Io(format!("column {name} missing from {}", csv_path.display())))
    };
    let row_type = col("row_type")?;
    let axis_cols: Vec<usize> = AXES.iter().map(|a| col(a)).collect::<Result<_>>()?;
    col("success_rate")?;
    col("mean_excess")?;
    let mut values: Vec<Vec<String>> = vec![Vec::new(); AXES.len()];
    let mut count = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DpError::Io(e.to_string()))?;
        if rec.get(row_type) != Some("aggregate") {
            continue;
        }
        count += 1;
        for (k, &c) in axis_cols.iter().enumerate() {
            values[k].push(rec.get(c).unwrap_or("").to_string());
        }
    }
    if count == 0 {
        return Err(DpError::Io(format!("{} has no aggregate rows", csv_path.display())));
    }
    let axis = AXES.iter().zip(&values).find(|(_, v)| v.iter().any(|x| x != &v[0])).map_or("sweep", |(a, _)| *a);
    let data = csv_path.display().to_string().replace('\'', "''");
    let select = format!("(strcol('row_type') eq 'aggregate' ? column('{axis}') : NaN)");
    let mut s = String::new();
    s.push_str(&format!("# success rate and mean excess error against {axis}\n"));
    s.push_str("set datafile separator ','\nset datafile columnheaders\n");
    s.push_str(&format!("set terminal pngcairo size 1000,420\nset output '{data}.png'\n"));
    s.push_str("set multiplot layout 1,2\n");
    s.push_str(&format!("set xlabel '{axis}'\n"));
    if axis == "n" {
        s.push_str("set logscale x 2\n");
    }
    s.push_str("set ylabel 'success rate'\nset yrange [0:1.05]\n");
    s.push_str(&format!(
        "plot '{data}' using {select}:(column('success_rate')) with linespoints title 'success rate'\n"
    ));
    s.push_str("set ylabel 'mean excess error'\nset autoscale y\n");
    s.push_str(&format!(
        "plot '{data}' using {select}:(column('mean_excess')) with linespoints title 'mean excess error'\n"
    ));
    s.push_str("unset multiplot\n");
    std::fs::write(script_path, &s)?;
    Ok(s)
}

/// Outcome of a search for the smallest `n` reaching a success target.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeSearch {
    pub n: Option<usize>,
    /// Every `(n, success rate)` evaluated, in evaluation order.
    pub evaluated: Vec<(usize, f64)>,
}

/// Success rate of `config` at a single `n` (sweep axes ignored).
pub fn success_rate_at(config: &ExperimentConfig, n: usize, threads: Option<usize>) -> Result<f64> {
    let p = SweepPoint { index: 0, n, m: config.m, epsilon: config.epsilon, alpha: config.alpha };
    let mut cfg = config.single_point(&p);
    cfg.seed = derive_seed(config.seed, &[n as u64]);
    let res = run_experiment(&cfg, threads)?;
    Ok(res.aggregates[0].success_rate)
}

/// Doubles `n` from `n_start` until the success rate reaches `target`, then,
/// if `refine` is set, bisects between the last failing and first passing
/// `n` down to a gap of `max(1, n/16)`.
pub fn minimal_n_search(
    config: &ExperimentConfig,
    target: f64,
    n_start: usize,
    n_max: usize,
    refine: bool,
    threads: Option<usize>,
) -> Result<SampleSizeSearch> {
    if n_start == 0 || n_start > n_max {
        return Err(config_err(format!("bad search range [{n_start}, {n_max}]")));
    }
    let mut evaluated = Vec::new();
    let mut lo = 0usize;
    let mut n = n_start;
    let hi = loop {
        let rate = success_rate_at(config, n, threads)?;
        evaluated.push((n, rate));
        if rate >= target {
            break n;
        }
        lo = n;
        if n >= n_max {
            return Ok(SampleSizeSearch { n: None, evaluated });
        }
        n = (n * 2).min(n_max);
    };
    let mut hi = hi;
    if refine && lo > 0 {
        let resolution = (hi / 16).max(1);
        while hi - lo > resolution {
            let mid = lo + (hi - lo) / 2;
            let rate = success_rate_at(config, mid, threads)?;
            evaluated.push((mid, rate));
            if rate >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(SampleSizeSearch { n: Some(hi), evaluated })
}
