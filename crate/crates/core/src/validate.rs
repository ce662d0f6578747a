//! Fast invariant checks behind the `validate` subcommand.

use crate::ensembles::{povm_from_unitary, sample_global_haar, sample_local_haar_tensor};
use crate::error::Result;
use crate::estimators::{cs_channel_apply, cs_channel_inverse, estimate, ShadowMethod};
use crate::experiments::{rows_to_csv, run_scenario, Scenario, ScenarioKind};
use crate::io::{parse_records, records_to_string, RecordsFile};
use crate::linalg::{c, hermitian_deviation, hermitian_eigenvalues, unitarity_deviation, CMatrix};
use crate::measurement::{run_plan, sample_counts, MeasurementPlan};
use crate::quantum::{born_probabilities, project_physical, DensityMatrix, Operator};
use crate::rng::RngStream;
use crate::theory::random_observable_cdf;
use crate::EnsembleSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult {
            name,
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_state(d: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = RngStream::new(seed, 0, 0);
    let g = sample_global_haar(d, &mut rng)?;
    let weights: Vec<f64> = (0..d).map(|k| (k + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let diag = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            c(weights[i] / total, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let rho = &g * diag * g.adjoint();
    DensityMatrix::new((&rho + rho.adjoint()) * c(0.5, 0.0))
}

pub fn run_checks() -> Vec<CheckResult> {
    vec![
        check("haar-unitarity", || {
            let mut worst: f64 = 0.0;
            for m in 0..200 {
                let mut rng = RngStream::new(1, 0, m);
                worst = worst.max(unitarity_deviation(&sample_global_haar(8, &mut rng)?));
                worst = worst.max(unitarity_deviation(&sample_local_haar_tensor(3, &mut rng)?));
            }
            Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
        }),
        check("povm-completeness", || {
            let povm = povm_from_unitary(sample_global_haar(8, &mut RngStream::new(2, 0, 0))?)?;
            let mut sum = CMatrix::zeros(8, 8);
            for k in 0..povm.outcomes() {
                sum += povm.element(k);
            }
            let dev = (sum - CMatrix::identity(8, 8)).norm();
            Ok((dev < 1e-12, format!("‖Σ A_k − I‖ = {dev:.2e}")))
        }),
        check("born-normalization", || {
            let rho = random_state(8, 3)?;
            let mut worst: f64 = 0.0;
            for m in 0..100 {
                let povm = povm_from_unitary(sample_global_haar(8, &mut RngStream::new(3, 1, m))?)?;
                let p = born_probabilities(&povm, &rho)?;
                worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
            }
            Ok((worst < 1e-12, format!("max |Σp − 1| = {worst:.2e}")))
        }),
        check("multinomial-counts", || {
            let mut rng = RngStream::new(4, 0, 0);
            let p = [0.1, 0.2, 0.3, 0.4];
            let ok = [1u64, 5, 64, 4096]
                .iter()
                .all(|&l| sample_counts(&p, l, &mut rng).is_ok_and(|f| f.iter().sum::<u64>() == l));
            Ok((ok, "counts sum to L".into()))
        }),
        check("cs-shadow-spectrum", || {
            let rho = random_state(8, 5)?;
            let plan = MeasurementPlan::new(50, 1, EnsembleSpec::GlobalHaar { dim: 8 })?;
            let records = run_plan(&rho, &plan, &RngStream::new(5, 0, 0))?;
            let set = estimate(&records, ShadowMethod::Cs)?;
            let mut worst: f64 = 0.0;
            for s in &set.shadows {
                let eig = hermitian_eigenvalues(s.matrix());
                worst = worst.max((s.trace() - 1.0).abs());
                worst = worst.max((eig[7] - 8.0).abs());
                for &e in &eig[..7] {
                    worst = worst.max((e + 1.0).abs());
                }
            }
            Ok((worst < 1e-9, format!("max deviation {worst:.2e}")))
        }),
        check("channel-inverse", || {
            let x = random_state(4, 6)?.into_matrix();
            let dev = (cs_channel_inverse(&cs_channel_apply(&x)) - &x).norm();
            Ok((dev < 1e-12, format!("round trip error {dev:.2e}")))
        }),
        check("ls-unit-trace", || {
            let rho = random_state(8, 7)?;
            let mut worst: f64 = 0.0;
            for trial in 0..10 {
                let plan = MeasurementPlan::new(8, 1, EnsembleSpec::GlobalHaar { dim: 8 })?;
                let records = run_plan(&rho, &plan, &RngStream::new(7, trial, 0))?;
                let est = estimate(&records, ShadowMethod::ls())?.average;
                worst = worst.max((est.trace() - 1.0).abs());
                worst = worst.max(hermitian_deviation(est.matrix()));
            }
            Ok((
                worst < 1e-8,
                format!("max |tr − 1| or asymmetry {worst:.2e}"),
            ))
        }),
        check("rls-small-mu-limit", || {
            let rho = random_state(4, 8)?;
            let plan = MeasurementPlan::new(64, 10, EnsembleSpec::GlobalHaar { dim: 4 })?;
            let records = run_plan(&rho, &plan, &RngStream::new(8, 0, 0))?;
            let ls = estimate(&records, ShadowMethod::ls())?.average;
            let rls = estimate(&records, ShadowMethod::Rls { mu: 1e-9 })?.average;
            let dev = (ls.matrix() - rls.matrix()).norm();
            Ok((dev < 1e-6, format!("‖LS − RLS(μ=1e-9)‖ = {dev:.2e}")))
        }),
        check("physical-projection", || {
            let rho = random_state(8, 9)?;
            let plan = MeasurementPlan::new(16, 1, EnsembleSpec::GlobalHaar { dim: 8 })?;
            let records = run_plan(&rho, &plan, &RngStream::new(9, 0, 0))?;
            let est = estimate(&records, ShadowMethod::Cs)?.average;
            let p1 = project_physical(&est)?;
            let p2 = project_physical(&p1)?;
            let min = hermitian_eigenvalues(p1.matrix())[0];
            let idem = (p1.matrix() - p2.matrix()).norm();
            Ok((
                min >= -1e-10 && idem < 1e-10,
                format!("min eigenvalue {min:.2e}, idempotence {idem:.2e}"),
            ))
        }),
        check("random-observable-cdf", || {
            let ends = (
                random_observable_cdf(0.0, 32),
                random_observable_cdf(1.0, 32),
            );
            Ok((
                ends == (0.0, 1.0),
                format!("F(0) = {}, F(1) = {}", ends.0, ends.1),
            ))
        }),
        check("records-round-trip", || {
            let rho = random_state(4, 10)?;
            let plan = MeasurementPlan::new(5, 3, EnsembleSpec::GlobalHaar { dim: 4 })?;
            let records = run_plan(&rho, &plan, &RngStream::new(10, 0, 0))?;
            let file = RecordsFile {
                dim: 4,
                shots: 3,
                seed: 10,
                records,
            };
            let ok = parse_records(&records_to_string(&file))? == file;
            Ok((ok, "parse(write(records)) == records".into()))
        }),
        check("worker-determinism", || {
            let mut s = Scenario::defaults(ScenarioKind::RlsVsCs);
            s.qubits = 2;
            s.trials = 4;
            s.m_grid = vec![2, 8];
            let one = rows_to_csv(&run_scenario(&s, 1)?);
            let four = rows_to_csv(&run_scenario(&s, 4)?);
            Ok((one == four, format!("{} bytes", one.len())))
        }),
    ]
}

/// Fixed-width table, one line per check.
pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {:width$}  {}\n", r.name, r.detail));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    out.push_str(&format!("{} checks, {failed} failed\n", results.len()));
    out
}
