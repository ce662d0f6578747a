//! Scenario runner: simulates trials over grids of `M`, `L`, `μ` and `η`,
//! estimates with LS, RLS or CS and emits one CSV row per metric.
//!
//! Within a trial the records for a smaller `M` are a prefix of the records
//! for a larger one. Trial `t` draws setting `m` from stream `(seed, t, m)`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_haar_vector, EnsembleSpec};
use crate::error::{Error, Result};
use crate::estimators::{build_frame_operator, LsSolver, RlsSolver, DEFAULT_MU, DEFAULT_RCOND};
use crate::linalg::{c, hermitian_deviation, CMatrix, CVector};
use crate::measurement::{record_adjoint, run_plan, MeasurementPlan, MeasurementRecord};
use crate::quantum::{
    eigenvalue_split, expectation, frobenius_error, log_likelihood, project_physical,
    DensityMatrix, MethodTag, Observable, Operator, RankOnePovm, ShadowEstimate,
};
use crate::rng::{domain, RngStream};
use crate::theory::{empirical_mse, mse_theorem1};

/// Largest qubit count run without `force`; the frame operator is
/// `4^n × 4^n`.
pub const GUARD_QUBITS: usize = 7;
const MAX_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    DoubleDescent,
    MuSweep,
    RlsVsCs,
    RandomObservables,
    Mismatch,
    Multishot,
    Theorem1Check,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::DoubleDescent,
        ScenarioKind::MuSweep,
        ScenarioKind::RlsVsCs,
        ScenarioKind::RandomObservables,
        ScenarioKind::Mismatch,
        ScenarioKind::Multishot,
        ScenarioKind::Theorem1Check,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ScenarioKind::DoubleDescent => "double-descent",
            ScenarioKind::MuSweep => "mu-sweep",
            ScenarioKind::RlsVsCs => "rls-vs-cs",
            ScenarioKind::RandomObservables => "random-obs",
            ScenarioKind::Mismatch => "mismatch",
            ScenarioKind::Multishot => "multishot",
            ScenarioKind::Theorem1Check => "theorem1",
        }
    }

    fn methods(self) -> (bool, bool, bool) {
        // (LS, RLS, CS)
        match self {
            ScenarioKind::DoubleDescent => (true, false, false),
            ScenarioKind::MuSweep => (false, true, false),
            ScenarioKind::Theorem1Check => (false, false, true),
            _ => (false, true, true),
        }
    }
}

/// Which observables are tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableSet {
    /// `φ₀ = e₀`, `φ₁ = e₀/√2 + Σ_{j≥1} e_j/√(2(D−1))`, `φ₂ = e₁`.
    Canonical,
    /// Haar-random unit vectors shared by every trial.
    Random { count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub qubits: usize,
    pub trials: usize,
    /// Settings `M`; for `Multishot` these are totals `M·L`.
    pub m_grid: Vec<usize>,
    pub l_grid: Vec<u64>,
    /// RLS regularization values; every RLS estimate is computed for each.
    pub mu: Vec<f64>,
    /// Mixture weights; only `Mismatch` reads this.
    pub eta_grid: Vec<f64>,
    pub observables: ObservableSet,
    pub seed: u64,
    pub rcond: f64,
    /// POVM draws per `mse_theorem1` evaluation.
    pub theory_samples: usize,
    pub force: bool,
}

/// Partial scenario as read from a JSON file or flags. Unset fields fall back
/// to the per-kind defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Option<ScenarioKind>,
    pub qubits: Option<usize>,
    pub trials: Option<usize>,
    pub m_grid: Option<Vec<usize>>,
    pub l_grid: Option<Vec<u64>>,
    pub mu: Option<Vec<f64>>,
    pub eta_grid: Option<Vec<f64>>,
    pub observables: Option<ObservableSet>,
    pub seed: Option<u64>,
    pub rcond: Option<f64>,
    pub theory_samples: Option<usize>,
    pub force: Option<bool>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Fields set in `other` replace fields set in `self`.
    pub fn overridden_by(self, other: ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            kind: other.kind.or(self.kind),
            qubits: other.qubits.or(self.qubits),
            trials: other.trials.or(self.trials),
            m_grid: other.m_grid.or(self.m_grid),
            l_grid: other.l_grid.or(self.l_grid),
            mu: other.mu.or(self.mu),
            eta_grid: other.eta_grid.or(self.eta_grid),
            observables: other.observables.or(self.observables),
            seed: other.seed.or(self.seed),
            rcond: other.rcond.or(self.rcond),
            theory_samples: other.theory_samples.or(self.theory_samples),
            force: other.force.or(self.force),
        }
    }
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

impl Scenario {
    /// Desk-scale defaults (three qubits).
    pub fn defaults(kind: ScenarioKind) -> Self {
        let mut s = Scenario {
            kind,
            qubits: 3,
            trials: 50,
            m_grid: powers_of_two(2, 11),
            l_grid: vec![1],
            mu: vec![DEFAULT_MU],
            eta_grid: vec![0.0],
            observables: ObservableSet::Canonical,
            seed: 0,
            rcond: DEFAULT_RCOND,
            theory_samples: 10_000,
            force: false,
        };
        match kind {
            ScenarioKind::MuSweep => s.mu = vec![0.01, 0.1, 1.0],
            ScenarioKind::RandomObservables => s.observables = ObservableSet::Random { count: 50 },
            ScenarioKind::Mismatch => s.eta_grid = vec![0.0, 0.25, 0.5, 0.75, 1.0],
            ScenarioKind::Multishot => {
                s.m_grid = powers_of_two(6, 12);
                s.l_grid = vec![1, 4, 16, 64];
            }
            ScenarioKind::Theorem1Check => {
                s.qubits = 2;
                s.trials = 1000;
                s.m_grid = vec![16];
                s.l_grid = vec![1, 4, 16];
            }
            _ => {}
        }
        s
    }

    pub fn from_config(kind: ScenarioKind, cfg: ScenarioConfig) -> Result<Self> {
        if let Some(k) = cfg.kind {
            if k != kind {
                return Err(Error::InvalidArgument(format!(
                    "config is for scenario '{}', not '{}'",
                    k.id(),
                    kind.id()
                )));
            }
        }
        let d = Scenario::defaults(kind);
        let s = Scenario {
            kind,
            qubits: cfg.qubits.unwrap_or(d.qubits),
            trials: cfg.trials.unwrap_or(d.trials),
            m_grid: cfg.m_grid.unwrap_or(d.m_grid),
            l_grid: cfg.l_grid.unwrap_or(d.l_grid),
            mu: cfg.mu.unwrap_or(d.mu),
            eta_grid: cfg.eta_grid.unwrap_or(d.eta_grid),
            observables: cfg.observables.unwrap_or(d.observables),
            seed: cfg.seed.unwrap_or(d.seed),
            rcond: cfg.rcond.unwrap_or(d.rcond),
            theory_samples: cfg.theory_samples.unwrap_or(d.theory_samples),
            force: cfg.force.unwrap_or(d.force),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.qubits < 1 || self.qubits > MAX_QUBITS {
            return bad(format!("qubits {} outside [1, {MAX_QUBITS}]", self.qubits));
        }
        if self.qubits > GUARD_QUBITS && !self.force {
            return Err(Error::ResourceGuard(format!(
                "{} qubits needs a {0}x{0} frame operator; pass --force to run anyway",
                1usize << (2 * self.qubits)
            )));
        }
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return bad("M grid must be nonempty with entries >= 1".into());
        }
        if self.l_grid.is_empty() || self.l_grid.contains(&0) {
            return bad("L grid must be nonempty with entries >= 1".into());
        }
        if self.mu.is_empty() || self.mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return bad("mu values must be finite and > 0".into());
        }
        if self.eta_grid.is_empty() || self.eta_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("eta grid must be nonempty with entries in [0, 1]".into());
        }
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return bad(format!("rcond {} outside (0, 1)", self.rcond));
        }
        if let ObservableSet::Random { count } = self.observables {
            if count < 1 {
                return bad("random observable count must be >= 1".into());
            }
        }
        if self.kind == ScenarioKind::Theorem1Check && self.theory_samples < 2 {
            return bad("theory_samples must be >= 2".into());
        }
        if self.kind == ScenarioKind::Multishot && self.grid_points().is_empty() {
            return bad("no M·L total in the M grid is divisible by an L in the L grid".into());
        }
        Ok(())
    }

    /// `(M, L)` pairs to evaluate.
    fn grid_points(&self) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for &l in &self.l_grid {
            for &m in &self.m_grid {
                if self.kind == ScenarioKind::Multishot {
                    if (m as u64).is_multiple_of(l) {
                        out.push((m / l as usize, l));
                    } else {
                        log::warn!("multishot: skipping total {m}, not divisible by L = {l}");
                    }
                } else {
                    out.push((m, l));
                }
            }
        }
        out
    }

    fn etas(&self) -> Vec<Option<f64>> {
        if self.kind == ScenarioKind::Mismatch {
            self.eta_grid.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }

    fn ensemble(&self, eta: Option<f64>) -> EnsembleSpec {
        match eta {
            Some(eta) => EnsembleSpec::Mixture {
                eta,
                qubits: self.qubits,
            },
            None => EnsembleSpec::GlobalHaar { dim: self.dim() },
        }
    }

    fn emits_diagnostics(&self) -> bool {
        !matches!(
            self.kind,
            ScenarioKind::RandomObservables | ScenarioKind::Theorem1Check
        )
    }
}

/// Parses a grid such as `4,16,64`, `2^2..2^11` (powers of two) or
/// `0,0.25,0.5`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let perr = |msg: String| Error::Parse { line: 1, msg };
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(perr(format!("empty item in grid '{text}'")));
        }
        if let Some((lo, hi)) = item.split_once("..") {
            let exp = |s: &str| -> Result<u32> {
                s.trim()
                    .strip_prefix("2^")
                    .and_then(|e| e.parse::<u32>().ok())
                    .filter(|&e| e < 63)
                    .ok_or_else(|| perr(format!("range bounds must be 2^k with k < 63, got '{s}'")))
            };
            let (lo, hi) = (exp(lo)?, exp(hi)?);
            if lo > hi {
                return Err(perr(format!("empty range '{item}'")));
            }
            out.extend((lo..=hi).map(|k| (1u64 << k) as f64));
        } else if let Some(e) = item.strip_prefix("2^") {
            let k: u32 = e
                .parse()
                .ok()
                .filter(|&k| k < 63)
                .ok_or_else(|| perr(format!("invalid exponent in '{item}'")))?;
            out.push((1u64 << k) as f64);
        } else {
            let v: f64 = item
                .parse()
                .map_err(|_| perr(format!("invalid number '{item}'")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite value '{item}'")));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// [`parse_grid`] restricted to positive integers.
pub fn parse_int_grid(text: &str) -> Result<Vec<u64>> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v < 9.0e15 {
                Ok(v as u64)
            } else {
                Err(Error::Parse {
                    line: 1,
                    msg: format!("expected a positive integer, got {v}"),
                })
            }
        })
        .collect()
}

/// `ρ = e₀e₀†` and `(name, Λ)` for the three reference observables at
/// `D = 2^n`.
pub fn canonical_state_and_observables(
    n: usize,
) -> Result<(DensityMatrix, Vec<(String, Observable)>)> {
    if !(1..=MAX_QUBITS).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "qubits {n} outside [1, {MAX_QUBITS}]"
        )));
    }
    canonical_for_dim(1 << n)
}

fn canonical_for_dim(d: usize) -> Result<(DensityMatrix, Vec<(String, Observable)>)> {
    let rho = DensityMatrix::basis(d, 0)?;
    let e = |k: usize| {
        let mut v = CVector::zeros(d);
        v[k] = c(1.0, 0.0);
        v
    };
    let mut phi1 = CVector::from_element(d, c(1.0 / (2.0 * (d as f64 - 1.0)).sqrt(), 0.0));
    phi1[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let phi1 = phi1.unscale(phi1.norm());
    Ok((
        rho,
        vec![
            ("0".to_string(), Observable::rank_one(e(0))?),
            ("1".to_string(), Observable::rank_one(phi1)?),
            ("2".to_string(), Observable::rank_one(e(1))?),
        ],
    ))
}

/// Observables `φ_j φ_j†` with `φ_j` Haar-random, shared by all trials.
pub fn random_observables(d: usize, count: usize, seed: u64) -> Result<Vec<(String, Observable)>> {
    let base = RngStream::new(seed, 0, 0).fork(domain::OBSERVABLES);
    (0..count)
        .map(|j| {
            let phi = sample_haar_vector(d, &mut base.for_measurement(j as u64))?;
            Ok((format!("r{j}"), Observable::rank_one(phi)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario: &'static str,
    /// `None` marks a row aggregated over trials.
    pub trial: Option<usize>,
    pub m: usize,
    pub l: u64,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub method: MethodTag,
    pub metric: String,
    pub value: f64,
}

fn cmp_opt_f64(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

impl ResultRow {
    /// Order: trial (aggregates last), M, L, method, metric, then μ, η, value.
    pub fn sort_cmp(&self, other: &Self) -> Ordering {
        let trial_key = |t: Option<usize>| t.map_or((1, 0), |t| (0, t));
        trial_key(self.trial)
            .cmp(&trial_key(other.trial))
            .then(self.m.cmp(&other.m))
            .then(self.l.cmp(&other.l))
            .then(self.method.cmp(&other.method))
            .then_with(|| self.metric.cmp(&other.metric))
            .then(cmp_opt_f64(self.mu, other.mu))
            .then(cmp_opt_f64(self.eta, other.eta))
            .then(self.value.total_cmp(&other.value))
            .then_with(|| self.scenario.cmp(other.scenario))
    }
}

pub const CSV_HEADER: &str = "scenario,trial,M,L,mu,eta,method,metric,value";

/// Sorts and renders rows. Values use 17 significant digits; `μ` and `η` use
/// the shortest exact representation and are empty where not applicable.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.sort_cmp(b));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    let mut write = |fields: [&str; 9]| w.write_record(fields).expect("in-memory write");
    write([
        "scenario", "trial", "M", "L", "mu", "eta", "method", "metric", "value",
    ]);
    for r in sorted {
        let trial = r.trial.map_or("all".to_string(), |t| t.to_string());
        write([
            r.scenario,
            &trial,
            &r.m.to_string(),
            &r.l.to_string(),
            &opt(r.mu),
            &opt(r.eta),
            r.method.as_str(),
            &r.metric,
            &format!("{:.16e}", r.value),
        ]);
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("fields are UTF-8")
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, rows_to_csv(rows)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Identifies one estimate within a trial.
#[derive(Clone, Copy, Debug, PartialEq)]
struct GroupKey {
    m: usize,
    l: u64,
    mu: Option<f64>,
    eta: Option<f64>,
    method: MethodTag,
}

impl GroupKey {
    fn row(
        &self,
        scenario: &'static str,
        trial: Option<usize>,
        metric: String,
        value: f64,
    ) -> ResultRow {
        ResultRow {
            scenario,
            trial,
            m: self.m,
            l: self.l,
            mu: self.mu,
            eta: self.eta,
            method: self.method,
            metric,
            value,
        }
    }

    fn sort_key(&self) -> (usize, u64, MethodTag, u64, u64) {
        let bits = |v: Option<f64>| v.map_or(0, |x| x.to_bits().wrapping_add(1));
        (self.m, self.l, self.method, bits(self.mu), bits(self.eta))
    }
}

struct Context {
    rho: DensityMatrix,
    observables: Vec<(String, Observable)>,
    truths: Vec<f64>,
}

impl Context {
    fn new(s: &Scenario) -> Result<Self> {
        let (rho, canonical) = canonical_state_and_observables(s.qubits)?;
        let observables = match s.observables {
            ObservableSet::Canonical => canonical,
            ObservableSet::Random { count } => random_observables(s.dim(), count, s.seed)?,
        };
        let truths = observables
            .iter()
            .map(|(_, o)| expectation(o, &rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rho,
            observables,
            truths,
        })
    }
}

/// Estimates from one trial: each group with its `lambda-hat` values.
type TrialOutput = (Vec<ResultRow>, Vec<(GroupKey, Vec<f64>)>);

/// Records of trial `trial` for `eta` and `L`, with `settings` entries.
pub fn simulate_records(
    s: &Scenario,
    trial: usize,
    eta: Option<f64>,
    shots: u64,
    settings: usize,
) -> Result<Vec<MeasurementRecord>> {
    let (rho, _) = canonical_state_and_observables(s.qubits)?;
    let plan = MeasurementPlan::new(settings, shots, s.ensemble(eta))?;
    run_plan(&rho, &plan, &RngStream::new(s.seed, trial as u64, 0))
}

fn check_estimate(est: &ShadowEstimate, method: MethodTag) -> Result<()> {
    let dev = hermitian_deviation(est.matrix());
    if dev > 1e-10 {
        return Err(Error::NonHermitian(format!(
            "{method} estimate deviates by {dev:e}"
        )));
    }
    if method == MethodTag::Cs && (est.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::TraceOutOfRange { trace: est.trace() });
    }
    Ok(())
}

/// Estimates for every method on one record prefix. The average of the
/// per-record shadows equals the shadow map applied to the mean partial
/// operator, so one solve per method suffices.
fn estimates_for_prefix(
    s: &Scenario,
    records: &[MeasurementRecord],
    mean_partial: &CMatrix,
) -> Result<Vec<(MethodTag, Option<f64>, ShadowEstimate)>> {
    let (ls, rls, cs) = s.kind.methods();
    let d = mean_partial.nrows();
    let mut out = Vec::new();
    if ls || rls {
        let povms: Vec<RankOnePovm> = records.iter().map(|r| r.povm().clone()).collect();
        let frame = build_frame_operator(&povms)?;
        if ls {
            let est = LsSolver::new(&frame, s.rcond)?.apply(std::slice::from_ref(mean_partial));
            out.push((
                MethodTag::Ls,
                None,
                est.into_iter().next().expect("one estimate"),
            ));
        }
        if rls {
            for &mu in &s.mu {
                let est = RlsSolver::new(&frame, mu)?.apply(std::slice::from_ref(mean_partial));
                out.push((
                    MethodTag::Rls,
                    Some(mu),
                    est.into_iter().next().expect("one estimate"),
                ));
            }
        }
    }
    if cs {
        let shadow = mean_partial * c(d as f64 + 1.0, 0.0) - CMatrix::identity(d, d);
        out.push((
            MethodTag::Cs,
            None,
            ShadowEstimate::from_hermitian(shadow, MethodTag::Cs),
        ));
    }
    Ok(out)
}

fn run_trial(s: &Scenario, ctx: &Context, trial: usize) -> Result<TrialOutput> {
    let id = s.kind.id();
    let points = s.grid_points();
    let mut rows = Vec::new();
    let mut lambdas = Vec::new();
    for eta in s.etas() {
        for &l in &s.l_grid {
            let mut ms: Vec<usize> = points.iter().filter(|p| p.1 == l).map(|p| p.0).collect();
            ms.sort_unstable();
            ms.dedup();
            let Some(&max_m) = ms.last() else { continue };
            let records = simulate_records(s, trial, eta, l, max_m)?;
            let d = s.dim();
            let mut running = CMatrix::zeros(d, d);
            let mut used = 0;
            for &m in &ms {
                for rec in &records[used..m] {
                    running += record_adjoint(rec);
                }
                used = m;
                let mean_partial = &running / c(m as f64, 0.0);
                for (method, mu, est) in estimates_for_prefix(s, &records[..m], &mean_partial)? {
                    check_estimate(&est, method)?;
                    let key = GroupKey {
                        m,
                        l,
                        mu,
                        eta,
                        method,
                    };
                    let mut push = |metric: String, value: f64| -> Result<()> {
                        if !value.is_finite() {
                            return Err(Error::InvalidArgument(format!(
                                "non-finite {metric} at trial {trial}, M = {m}, L = {l}, {method}"
                            )));
                        }
                        rows.push(key.row(id, Some(trial), metric, value));
                        Ok(())
                    };
                    let lam = ctx
                        .observables
                        .iter()
                        .map(|(_, o)| expectation(o, &est))
                        .collect::<Result<Vec<f64>>>()?;
                    for ((name, _), &v) in ctx.observables.iter().zip(&lam) {
                        push(format!("lambda-hat:{name}"), v)?;
                    }
                    if s.emits_diagnostics() {
                        push("frobenius-error".into(), frobenius_error(&est, &ctx.rho)?)?;
                        push("trace".into(), est.trace())?;
                        let (pos, neg) = eigenvalue_split(&est)?;
                        push("eig-pos".into(), pos)?;
                        push("eig-neg".into(), neg)?;
                        match project_physical(&est) {
                            Ok(phys) => {
                                push("loglik".into(), log_likelihood(&records[..m], &phys)?.value)?
                            }
                            Err(e) => log::warn!(
                                "trial {trial}, M = {m}, L = {l}, {method}: no loglik row ({e})"
                            ),
                        }
                    }
                    lambdas.push((key, lam));
                }
            }
        }
    }
    Ok((rows, lambdas))
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn aggregate(s: &Scenario, ctx: &Context, outputs: &[TrialOutput]) -> Result<Vec<ResultRow>> {
    let id = s.kind.id();
    type Groups<'a> = BTreeMap<(usize, u64, MethodTag, u64, u64), (GroupKey, Vec<&'a Vec<f64>>)>;
    let mut groups: Groups = BTreeMap::new();
    for (_, lambdas) in outputs {
        for (key, lam) in lambdas {
            groups
                .entry(key.sort_key())
                .or_insert_with(|| (*key, Vec::new()))
                .1
                .push(lam);
        }
    }
    let mut frob: BTreeMap<(usize, u64, MethodTag, u64, u64), Vec<f64>> = BTreeMap::new();
    for (rows, _) in outputs {
        for r in rows.iter().filter(|r| r.metric == "frobenius-error") {
            let key = GroupKey {
                m: r.m,
                l: r.l,
                mu: r.mu,
                eta: r.eta,
                method: r.method,
            };
            frob.entry(key.sort_key()).or_default().push(r.value);
        }
    }

    let mut rows = Vec::new();
    for (sk, (key, per_trial)) in &groups {
        if per_trial.len() >= 2 {
            for (i, (name, _)) in ctx.observables.iter().enumerate() {
                let est: Vec<f64> = per_trial.iter().map(|lam| lam[i]).collect();
                let mse = empirical_mse(&est, ctx.truths[i])?;
                rows.push(key.row(id, None, format!("mse:{name}"), mse.value));
                rows.push(key.row(id, None, format!("mse-se:{name}"), mse.std_error));
            }
        }
        if s.kind == ScenarioKind::RandomObservables {
            for (i, (name, _)) in ctx.observables.iter().enumerate() {
                rows.push(key.row(id, None, format!("lambda-true:{name}"), ctx.truths[i]));
            }
        }
        if let Some(values) = frob.get(sk) {
            let mut values = values.clone();
            rows.push(key.row(id, None, "frobenius-median".into(), median(&mut values)));
        }
    }

    if s.kind == ScenarioKind::Theorem1Check {
        let spec = EnsembleSpec::GlobalHaar { dim: s.dim() };
        let base = RngStream::new(s.seed, 0, 0);
        for (m, l) in s.grid_points() {
            let key = GroupKey {
                m,
                l,
                mu: None,
                eta: None,
                method: MethodTag::Cs,
            };
            for (name, obs) in &ctx.observables {
                let th = mse_theorem1(&ctx.rho, obs, &spec, m, l, s.theory_samples, &base)?;
                rows.push(key.row(id, None, format!("mse-theory:{name}"), th.value));
                rows.push(key.row(id, None, format!("mse-theory-se:{name}"), th.std_error));
            }
        }
    }
    Ok(rows)
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers < 1 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Runs every trial on a pool of `workers` threads and returns the rows in
/// CSV order. The result does not depend on `workers`.
pub fn run_scenario(s: &Scenario, workers: usize) -> Result<Vec<ResultRow>> {
    s.validate()?;
    let ctx = Context::new(s)?;
    let pool = thread_pool(workers)?;
    let (outputs, aggregates) = pool.install(|| -> Result<_> {
        let outputs = (0..s.trials)
            .into_par_iter()
            .map(|t| run_trial(s, &ctx, t))
            .collect::<Result<Vec<_>>>()?;
        let aggregates = aggregate(s, &ctx, &outputs)?;
        Ok((outputs, aggregates))
    })?;
    let mut rows: Vec<ResultRow> = outputs.into_iter().flat_map(|(rows, _)| rows).collect();
    rows.extend(aggregates);
    rows.sort_by(|a, b| a.sort_cmp(b));
    Ok(rows)
}

/// Estimates from externally supplied records, treated as a single trial with
/// `L` taken from the file. Rows carry only the metrics that need no ground
/// truth: `lambda-hat`, `trace`, `eig-pos`, `eig-neg` and `loglik`.
pub fn run_on_records(s: &Scenario, records: &[MeasurementRecord]) -> Result<Vec<ResultRow>> {
    let first = records
        .first()
        .ok_or(Error::Empty("no records to estimate from"))?;
    let d = first.dim();
    let l = first.shots();
    if records.iter().any(|r| r.dim() != d || r.shots() != l) {
        return Err(Error::InvalidArgument(
            "records must share dimension and shot count".into(),
        ));
    }
    let (_, observables) = canonical_for_dim(d)?;
    let id = s.kind.id();
    let mut ms: Vec<usize> = s
        .m_grid
        .iter()
        .copied()
        .filter(|&m| m <= records.len())
        .collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "every M in the grid exceeds the {} loaded records",
            records.len()
        )));
    }
    let mut rows = Vec::new();
    for m in ms {
        let mut sum = CMatrix::zeros(d, d);
        for rec in &records[..m] {
            sum += record_adjoint(rec);
        }
        let mean_partial = sum / c(m as f64, 0.0);
        for (method, mu, est) in estimates_for_prefix(s, &records[..m], &mean_partial)? {
            check_estimate(&est, method)?;
            let key = GroupKey {
                m,
                l,
                mu,
                eta: None,
                method,
            };
            for (name, o) in &observables {
                rows.push(key.row(
                    id,
                    Some(0),
                    format!("lambda-hat:{name}"),
                    expectation(o, &est)?,
                ));
            }
            rows.push(key.row(id, Some(0), "trace".into(), est.trace()));
            let (pos, neg) = eigenvalue_split(&est)?;
            rows.push(key.row(id, Some(0), "eig-pos".into(), pos));
            rows.push(key.row(id, Some(0), "eig-neg".into(), neg));
            if let Ok(phys) = project_physical(&est) {
                rows.push(key.row(
                    id,
                    Some(0),
                    "loglik".into(),
                    log_likelihood(&records[..m], &phys)?.value,
                ));
            }
        }
    }
    rows.sort_by(|a, b| a.sort_cmp(b));
    Ok(rows)
}
