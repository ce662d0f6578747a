//! Shot simulation: multinomial outcome counts and the per-setting adjoint map.

use rand_distr::{Binomial, Distribution};

use crate::ensembles::{povm_from_unitary, sample_unitary, EnsembleSpec};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{c, hermitize, outer, CMatrix, CVector};
use crate::quantum::{born_probabilities, DensityMatrix, Operator, RankOnePovm};
use crate::rng::RngStream;

/// Outcome counts of one measurement setting.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    povm: RankOnePovm,
    counts: Vec<u64>,
    shots: u64,
}

impl MeasurementRecord {
    pub fn new(povm: RankOnePovm, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != povm.outcomes() {
            return Err(Error::DimMismatch {
                expected: povm.outcomes(),
                found: counts.len(),
            });
        }
        let shots = counts
            .iter()
            .try_fold(0u64, |acc, &f| acc.checked_add(f))
            .ok_or_else(|| Error::InvalidArgument("count total overflows".into()))?;
        if shots == 0 {
            return Err(Error::InvalidArgument(
                "record must contain at least one shot".into(),
            ));
        }
        Ok(Self {
            povm,
            counts,
            shots,
        })
    }

    pub fn povm(&self) -> &RankOnePovm {
        &self.povm
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn dim(&self) -> usize {
        self.povm.dim()
    }

    /// Splits an `L`-shot record into `L` single-shot records on the same POVM.
    pub fn split_shots(&self) -> Vec<MeasurementRecord> {
        let k_max = self.counts.len();
        let mut out = Vec::with_capacity(self.shots as usize);
        for (k, &f) in self.counts.iter().enumerate() {
            for _ in 0..f {
                let mut one_hot = vec![0; k_max];
                one_hot[k] = 1;
                out.push(MeasurementRecord {
                    povm: self.povm.clone(),
                    counts: one_hot,
                    shots: 1,
                });
            }
        }
        out
    }
}

/// `M` settings of `L` shots each, drawn from `ensemble`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPlan {
    pub settings: usize,
    pub shots: u64,
    pub ensemble: EnsembleSpec,
}

impl MeasurementPlan {
    pub fn new(settings: usize, shots: u64, ensemble: EnsembleSpec) -> Result<Self> {
        if settings < 1 || shots < 1 {
            return Err(Error::InvalidArgument(format!(
                "plan needs M >= 1 and L >= 1, got M = {settings}, L = {shots}"
            )));
        }
        ensemble.validate()?;
        Ok(Self {
            settings,
            shots,
            ensemble,
        })
    }
}

fn validate_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {bad} is not a probability"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidProbabilities(format!(
            "entries sum to {total}"
        )));
    }
    Ok(())
}

/// Exact multinomial draw by sequential conditional binomials.
pub fn sample_counts(p: &[f64], shots: u64, rng: &mut RngStream) -> Result<Vec<u64>> {
    validate_probabilities(p)?;
    if shots < 1 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let last = p.len() - 1;
    for (k, &pk) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            counts[k] = remaining;
            break;
        }
        let q = if mass <= 0.0 {
            1.0
        } else {
            (pk / mass).clamp(0.0, 1.0)
        };
        let draw = if q == 0.0 {
            0
        } else if q == 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .map_err(|e| Error::InvalidProbabilities(e.to_string()))?
                .sample(rng)
        };
        counts[k] = draw;
        remaining -= draw;
        mass -= pk;
    }
    Ok(counts)
}

/// `p̂_k = f_k / L`.
pub fn empirical_frequencies(rec: &MeasurementRecord) -> Vec<f64> {
    let l = rec.shots() as f64;
    rec.counts().iter().map(|&f| f as f64 / l).collect()
}

/// `Σ_k p̂_k u_k u_k† = U† diag(p̂) U`.
pub fn adjoint_map(povm: &RankOnePovm, phat: &[f64]) -> Result<CMatrix> {
    check_dim(povm.outcomes(), phat.len())?;
    let u = povm.unitary();
    let d = povm.dim();
    let mut weighted = u.clone();
    for (k, &w) in phat.iter().enumerate() {
        weighted.row_mut(k).scale_mut(w);
    }
    let out = u.adjoint() * weighted;
    debug_assert_eq!(out.nrows(), d);
    Ok(hermitize(&out))
}

/// `(U† p̂)(U† p̂)†`, which equals [`adjoint_map`] when `p̂` is one-hot.
pub fn adjoint_map_one_hot(povm: &RankOnePovm, phat: &[f64]) -> Result<CMatrix> {
    check_dim(povm.outcomes(), phat.len())?;
    let ones = phat.iter().filter(|&&x| x == 1.0).count();
    let zeros = phat.iter().filter(|&&x| x == 0.0).count();
    if ones != 1 || ones + zeros != phat.len() {
        return Err(Error::InvalidArgument(
            "frequency vector is not one-hot".into(),
        ));
    }
    let p = CVector::from_iterator(phat.len(), phat.iter().map(|&x| c(x, 0.0)));
    Ok(outer(&(povm.unitary().adjoint() * p)))
}

/// `A_m†(p̂_m)` of a record.
pub fn record_adjoint(rec: &MeasurementRecord) -> CMatrix {
    adjoint_map(rec.povm(), &empirical_frequencies(rec)).expect("record dimensions are consistent")
}

/// Simulates every setting of `plan` on `state`. Setting `m` draws its unitary
/// and counts from `base.for_measurement(m)`.
pub fn run_plan(
    state: &DensityMatrix,
    plan: &MeasurementPlan,
    base: &RngStream,
) -> Result<Vec<MeasurementRecord>> {
    check_dim(plan.ensemble.dim(), state.dim())?;
    (0..plan.settings)
        .map(|m| {
            let mut rng = base.for_measurement(m as u64);
            let drawn = sample_unitary(&plan.ensemble, &mut rng)?;
            let povm = povm_from_unitary(drawn.unitary)?;
            let p = born_probabilities(&povm, state)?;
            let counts = sample_counts(&p, plan.shots, &mut rng)?;
            MeasurementRecord::new(povm, counts)
        })
        .collect()
}
