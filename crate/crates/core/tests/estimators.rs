use nalgebra::DMatrix;
use shadow_core::ensembles::sample_global_haar;
use shadow_core::estimators::{build_frame_operator, cs_channel_apply, LsSolver, DEFAULT_RCOND};
use shadow_core::linalg::{c, herm_to_real, real_to_herm, unvec, vec, CMatrix, RMatrix, C64};
use shadow_core::measurement::adjoint_map;
use shadow_core::quantum::born_probabilities;
use shadow_core::stats::mean_and_se;
use shadow_core::{
    estimate, expectation, run_plan, DensityMatrix, EnsembleSpec, MeasurementPlan,
    MeasurementRecord, Operator, RankOnePovm, RngStream, ShadowMethod,
};

fn mixed_state() -> DensityMatrix {
    DensityMatrix::new(CMatrix::from_row_slice(
        2,
        2,
        &[c(0.7, 0.0), c(0.1, 0.15), c(0.1, -0.15), c(0.3, 0.0)],
    ))
    .unwrap()
}

/// Least-squares state from exact probabilities by solving the complex normal
/// equations `(A†A) vec(X) = A† p` on the stacked measurement map.
fn dense_normal_equations(povms: &[RankOnePovm], rho: &DensityMatrix) -> CMatrix {
    let d = rho.dim();
    let rows: Vec<(CMatrix, f64)> = povms
        .iter()
        .flat_map(|povm| {
            let p = born_probabilities(povm, rho).unwrap();
            (0..d)
                .map(move |k| (povm.element(k), p[k]))
                .collect::<Vec<_>>()
        })
        .collect();
    let a = DMatrix::<C64>::from_fn(rows.len(), d * d, |r, col| vec(&rows[r].0)[col].conj());
    let p =
        nalgebra::DVector::<C64>::from_iterator(rows.len(), rows.iter().map(|(_, p)| c(*p, 0.0)));
    let normal = a.adjoint() * &a;
    let rhs = a.adjoint() * p;
    let x = normal.lu().solve(&rhs).expect("informationally complete");
    unvec(&x, d)
}

fn exact_partial_mean(povms: &[RankOnePovm], rho: &DensityMatrix) -> CMatrix {
    let d = rho.dim();
    let mut acc = CMatrix::zeros(d, d);
    for povm in povms {
        acc += adjoint_map(povm, &born_probabilities(povm, rho).unwrap()).unwrap();
    }
    acc / c(povms.len() as f64, 0.0)
}

#[test]
fn ls_recovers_state_from_exact_probabilities() {
    let rho = mixed_state();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let pauli_bases = vec![
        CMatrix::identity(2, 2),
        CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, -h), c(h, 0.0), c(0.0, h)]),
    ];
    let haar: Vec<CMatrix> = (0..4)
        .map(|m| sample_global_haar(2, &mut RngStream::new(1, 0, m)).unwrap())
        .collect();
    for list in [pauli_bases, haar] {
        let povms: Vec<RankOnePovm> = list
            .into_iter()
            .map(|u| RankOnePovm::new(u).unwrap())
            .collect();
        let frame = build_frame_operator(&povms).unwrap();
        let solver = LsSolver::new(&frame, DEFAULT_RCOND).unwrap();
        assert_eq!(solver.rank(), 4);
        let est = solver.apply(&[exact_partial_mean(&povms, &rho)]).remove(0);
        let oracle = dense_normal_equations(&povms, &rho);
        assert!((est.matrix() - &oracle).norm() < 1e-8);
        assert!((est.matrix() - rho.matrix()).norm() < 1e-8);
    }
}

#[test]
fn frame_approaches_channel_as_settings_grow() {
    let d = 2;
    let n = d * d;
    let channel = RMatrix::from_fn(n, n, |i, j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        herm_to_real(&cs_channel_apply(&real_to_herm(&e, d)))[i]
    });
    let povms: Vec<RankOnePovm> = (0..10_000u64)
        .map(|m| {
            RankOnePovm::new(sample_global_haar(d, &mut RngStream::new(2, 0, m)).unwrap()).unwrap()
        })
        .collect();
    let errors: Vec<f64> = [100, 1_000, 10_000]
        .iter()
        .map(|&m| (build_frame_operator(&povms[..m]).unwrap().real_matrix() - &channel).norm())
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 0.02, "{errors:?}");
}

fn single_shot_records(d: usize, m: usize, trial: u64, seed: u64) -> Vec<MeasurementRecord> {
    let rho = DensityMatrix::basis(d, 0).unwrap();
    let plan = MeasurementPlan::new(m, 1, EnsembleSpec::GlobalHaar { dim: d }).unwrap();
    run_plan(&rho, &plan, &RngStream::new(seed, trial, 0)).unwrap()
}

#[test]
fn cs_mean_shadow_is_entrywise_unbiased() {
    let records = single_shot_records(2, 100_000, 0, 3);
    let set = estimate(&records, ShadowMethod::Cs).unwrap();
    let target = DensityMatrix::basis(2, 0).unwrap().into_matrix();
    for i in 0..2 {
        for j in 0..2 {
            for part in [0, 1] {
                let pick = |z: C64| if part == 0 { z.re } else { z.im };
                let xs: Vec<f64> = set
                    .shadows
                    .iter()
                    .map(|s| pick(s.matrix()[(i, j)]))
                    .collect();
                let (mean, se) = mean_and_se(&xs);
                assert!(
                    (mean - pick(target[(i, j)])).abs() <= 3.0 * se + 1e-12,
                    "({i},{j},{part})"
                );
            }
        }
    }
}

#[test]
fn cs_expectations_are_unbiased_over_trials() {
    for d in [2usize, 4] {
        let n = d.trailing_zeros() as usize;
        let (rho, observables) =
            shadow_core::experiments::canonical_state_and_observables(n).unwrap();
        let trials = 10_000u64;
        let mut per_obs: Vec<Vec<f64>> = (0..3)
            .map(|_| Vec::with_capacity(trials as usize))
            .collect();
        for t in 0..trials {
            let avg = estimate(&single_shot_records(d, 4, t, 4), ShadowMethod::Cs)
                .unwrap()
                .average;
            for (i, (_, o)) in observables.iter().enumerate() {
                per_obs[i].push(expectation(o, &avg).unwrap());
            }
        }
        for (i, (_, o)) in observables.iter().enumerate() {
            let truth = expectation(o, &rho).unwrap();
            let (mean, se) = mean_and_se(&per_obs[i]);
            assert!(
                (mean - truth).abs() < 3.0 * se,
                "D={d} obs {i}: {mean} vs {truth}"
            );
        }
    }
}

#[test]
fn multishot_record_equals_split_one_hot_records() {
    let d = 4;
    let rho = DensityMatrix::basis(d, 0).unwrap();
    let l = 5;
    let plan = MeasurementPlan::new(6, l, EnsembleSpec::GlobalHaar { dim: d }).unwrap();
    let records = run_plan(&rho, &plan, &RngStream::new(5, 0, 0)).unwrap();
    let split: Vec<MeasurementRecord> = records.iter().flat_map(|r| r.split_shots()).collect();
    assert_eq!(split.len(), 6 * l as usize);
    let cases = [
        (ShadowMethod::Cs, ShadowMethod::Cs),
        (ShadowMethod::ls(), ShadowMethod::ls()),
        // The duplicated frame is unchanged while the regularizer μ/M becomes
        // μ/(ML), so the split records need μ·L.
        (
            ShadowMethod::Rls { mu: 0.1 },
            ShadowMethod::Rls { mu: 0.1 * l as f64 },
        ),
        (
            ShadowMethod::Rls { mu: 1e-3 },
            ShadowMethod::Rls {
                mu: 1e-3 * l as f64,
            },
        ),
    ];
    for (multi, single) in cases {
        let a = estimate(&records, multi).unwrap().average;
        let b = estimate(&split, single).unwrap().average;
        assert!((a.matrix() - b.matrix()).norm() < 1e-10, "{multi:?}");
    }
}
