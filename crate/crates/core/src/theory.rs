//! Closed-form checks: multinomial moments, the multishot MSE formula for
//! classical shadows under global Haar settings, and the overlap density of
//! random rank-1 observables.

use rayon::prelude::*;

use crate::ensembles::{sample_global_haar, EnsembleSpec};
use crate::error::{check_dim, Error, Result};
use crate::linalg::trace;
use crate::quantum::{
    born_probabilities, expectation, DensityMatrix, Observable, Operator, RankOnePovm,
};
use crate::rng::{domain, RngStream};
use crate::stats::mean_and_se;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MseEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let (value, std_error) = mean_and_se(xs);
        Self {
            value,
            std_error,
            samples: xs.len(),
        }
    }

    /// `sqrt(se_a² + se_b²)`.
    pub fn combined_se(&self, other: &MseEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// Conditional moments of multinomial frequencies `p̂ = f / L`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultinomialMoments {
    /// `E[p̂_k²] = (p_k + (L − 1) p_k²) / L`.
    pub second: Vec<f64>,
    /// `E[p̂_k p̂_k']`; off-diagonal entries are `(1 − 1/L) p_k p_k'` and the
    /// diagonal repeats `second`.
    pub cross: Vec<Vec<f64>>,
}

pub fn multinomial_moments(p: &[f64], shots: u64) -> Result<MultinomialMoments> {
    if shots < 1 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidProbabilities(
            "entries must be finite and >= 0".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidProbabilities(format!(
            "entries sum to {total}"
        )));
    }
    let l = shots as f64;
    let second: Vec<f64> = p.iter().map(|&pk| (pk + (l - 1.0) * pk * pk) / l).collect();
    let cross = (0..p.len())
        .map(|i| {
            (0..p.len())
                .map(|j| {
                    if i == j {
                        second[i]
                    } else {
                        (1.0 - 1.0 / l) * p[i] * p[j]
                    }
                })
                .collect()
        })
        .collect();
    Ok(MultinomialMoments { second, cross })
}

/// Per-draw value of the MSE formula for one POVM.
fn theorem1_term(
    povm: &RankOnePovm,
    state: &DensityMatrix,
    obs: &Observable,
    truth: f64,
    settings: f64,
    shots: f64,
) -> Result<f64> {
    let d = povm.dim() as f64;
    let p = born_probabilities(povm, state)?;
    let tr_obs = trace(obs.matrix()).re;
    let lambda = obs.matrix();
    let mut diag_sum = 0.0;
    let mut weighted = 0.0;
    let mut weighted_sq = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        let u = povm.vector(k);
        // tr(Λ M⁻¹(A_k)) with M⁻¹(A_k) = (D + 1) u_k u_k† − I
        let quad = u.dotc(&(lambda * &u)).re;
        let t = (d + 1.0) * quad - tr_obs;
        diag_sum += (pk + (shots - 1.0) * pk * pk) * t * t;
        weighted += pk * t;
        weighted_sq += pk * pk * t * t;
    }
    let off_diag = weighted * weighted - weighted_sq;
    Ok(
        diag_sum / (settings * shots) + (1.0 - 1.0 / shots) / settings * off_diag
            - truth * truth / settings,
    )
}

/// Monte Carlo evaluation over global-Haar POVM draws of the exact MSE of the
/// CS estimate of `tr(Λρ)` from `M` settings with `L` shots each.
///
/// Draw `s` uses `base.fork(THEORY).for_measurement(s)`, so the same `base`
/// gives the same POVM draws for every `(M, L)`.
pub fn mse_theorem1(
    state: &DensityMatrix,
    obs: &Observable,
    spec: &EnsembleSpec,
    settings: usize,
    shots: u64,
    ensemble_samples: usize,
    base: &RngStream,
) -> Result<MseEstimate> {
    let d = match spec {
        EnsembleSpec::GlobalHaar { dim } => *dim,
        other => {
            return Err(Error::UnsupportedEnsemble(format!(
                "analytic channel inverse requires global Haar, got {other:?}"
            )))
        }
    };
    check_dim(d, state.dim())?;
    check_dim(d, obs.dim())?;
    if ensemble_samples < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: ensemble_samples,
        });
    }
    if settings < 1 || shots < 1 {
        return Err(Error::InvalidArgument("M and L must be >= 1".into()));
    }
    let truth = expectation(obs, state)?;
    let stream = base.fork(domain::THEORY);
    let values = (0..ensemble_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream.for_measurement(s as u64);
            let povm = RankOnePovm::new(sample_global_haar(d, &mut rng)?)?;
            theorem1_term(&povm, state, obs, truth, settings as f64, shots as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MseEstimate::from_samples(&values))
}

/// Density `(D − 1)(1 − λ)^{D−2}` of `|φ†ψ|²` for Haar-random unit `φ`.
pub fn random_observable_pdf(lam: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension {d} < 2")));
    }
    if !(0.0..=1.0).contains(&lam) {
        return Err(Error::InvalidArgument(format!(
            "lambda {lam} outside [0, 1]"
        )));
    }
    Ok((d as f64 - 1.0) * (1.0 - lam).powi(d as i32 - 2))
}

/// CDF `1 − (1 − λ)^{D−1}` matching [`random_observable_pdf`].
pub fn random_observable_cdf(lam: f64, d: usize) -> f64 {
    1.0 - (1.0 - lam.clamp(0.0, 1.0)).powi(d as i32 - 1)
}

/// Mean squared deviation from `truth` and its standard error.
pub fn empirical_mse(estimates: &[f64], truth: f64) -> Result<MseEstimate> {
    if estimates.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: estimates.len(),
        });
    }
    let sq: Vec<f64> = estimates.iter().map(|x| (x - truth).powi(2)).collect();
    Ok(MseEstimate::from_samples(&sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_shot_moments() {
        let p = [0.2, 0.3, 0.5];
        let m = multinomial_moments(&p, 1).unwrap();
        assert_eq!(m.second, p.to_vec());
        assert_eq!(m.cross[0][1], 0.0);
        assert_eq!(m.cross[2][2], 0.5);
    }

    #[test]
    fn large_shot_limit_and_identity() {
        let p = [0.25, 0.75];
        let m = multinomial_moments(&p, 1_000_000_000).unwrap();
        assert!((m.second[0] - 0.0625).abs() < 1e-9);
        for l in [1u64, 2, 7, 100] {
            let m = multinomial_moments(&p, l).unwrap();
            for (k, &pk) in p.iter().enumerate() {
                let excess = m.second[k] - pk * pk;
                assert!((excess - pk * (1.0 - pk) / l as f64).abs() < 1e-15);
                assert!(excess >= 0.0);
            }
        }
    }

    #[test]
    fn moments_example_value() {
        let m = multinomial_moments(&[0.5, 0.5], 4).unwrap();
        assert!((m.second[0] - 0.3125).abs() < 1e-15);
        assert!(multinomial_moments(&[0.5, 0.6], 4).is_err());
    }

    #[test]
    fn pdf_values() {
        assert_eq!(random_observable_pdf(0.0, 32).unwrap(), 31.0);
        assert!(random_observable_pdf(0.5, 2).unwrap() == 1.0);
        assert!(random_observable_pdf(1.1, 4).is_err());
        assert!(random_observable_pdf(0.5, 1).is_err());
        // Antiderivative: ∫₀¹ (D−1)(1−λ)^{D−2} dλ = [−(1−λ)^{D−1}]₀¹ = 1.
        assert!(
            (random_observable_cdf(1.0, 32) - random_observable_cdf(0.0, 32) - 1.0).abs() < 1e-15
        );
    }

    #[test]
    fn pdf_mean_is_one_over_d() {
        // Midpoint quadrature of λ P(λ).
        let d = 32;
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mean: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                x * random_observable_pdf(x, d).unwrap() * h
            })
            .sum();
        assert!((mean - 1.0 / 32.0).abs() < 1e-8);
        // Mode at zero: the density is decreasing for D > 2.
        assert!(random_observable_pdf(0.0, d).unwrap() > random_observable_pdf(1e-3, d).unwrap());
    }

    #[test]
    fn empirical_mse_examples() {
        let e = empirical_mse(&[0.3, 0.3, 0.3], 0.3).unwrap();
        assert_eq!((e.value, e.std_error), (0.0, 0.0));
        let e = empirical_mse(&[1.5, -0.5], 0.5).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
        assert!(empirical_mse(&[1.0], 0.0).is_err());
    }

    #[test]
    fn theorem1_rejects_unsupported_inputs() {
        let rho = DensityMatrix::basis(4, 0).unwrap();
        let obs = Observable::new(rho.matrix().clone()).unwrap();
        let base = RngStream::new(0, 0, 0);
        assert!(matches!(
            mse_theorem1(
                &rho,
                &obs,
                &EnsembleSpec::LocalHaarTensor { qubits: 2 },
                8,
                1,
                10,
                &base
            ),
            Err(Error::UnsupportedEnsemble(_))
        ));
        assert!(matches!(
            mse_theorem1(
                &rho,
                &obs,
                &EnsembleSpec::GlobalHaar { dim: 4 },
                8,
                1,
                1,
                &base
            ),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn theorem1_scales_as_one_over_m() {
        let rho = DensityMatrix::basis(4, 0).unwrap();
        let obs = Observable::new(rho.matrix().clone()).unwrap();
        let spec = EnsembleSpec::GlobalHaar { dim: 4 };
        let base = RngStream::new(3, 0, 0);
        for l in [1, 4] {
            let a = mse_theorem1(&rho, &obs, &spec, 8, l, 500, &base).unwrap();
            let b = mse_theorem1(&rho, &obs, &spec, 16, l, 500, &base).unwrap();
            assert!((b.value / a.value - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn theorem1_single_shot_reduces_to_first_term() {
        // With L = 1 the cross term vanishes:
        // MSE = (1/M) E[Σ_k p_k t_k²] − λ²/M.
        let d = 4;
        let rho = DensityMatrix::basis(d, 0).unwrap();
        let obs = Observable::new(rho.matrix().clone()).unwrap();
        let spec = EnsembleSpec::GlobalHaar { dim: d };
        let base = RngStream::new(5, 0, 0);
        let got = mse_theorem1(&rho, &obs, &spec, 8, 1, 200, &base).unwrap();
        let stream = base.fork(domain::THEORY);
        let mut acc = 0.0;
        for s in 0..200u64 {
            let mut rng = stream.for_measurement(s);
            let povm = RankOnePovm::new(sample_global_haar(d, &mut rng).unwrap()).unwrap();
            let p = born_probabilities(&povm, &rho).unwrap();
            for (k, pk) in p.iter().enumerate() {
                let t = (d as f64 + 1.0) * povm.vector(k)[0].norm_sqr() - 1.0;
                acc += pk * t * t;
            }
        }
        let expected = acc / 200.0 / 8.0 - 1.0 / 8.0;
        assert!((got.value - expected).abs() < 1e-12);
    }
}
