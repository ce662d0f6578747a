//! Random measurement settings: global Haar unitaries, tensor products of
//! qubit Haar unitaries, their mixture, and fixed lists.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};
use crate::quantum::RankOnePovm;
use crate::rng::{domain, RngStream};

/// Distribution over measurement unitaries.
#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleSpec {
    GlobalHaar {
        dim: usize,
    },
    LocalHaarTensor {
        qubits: usize,
    },
    /// Tensor-product draw with probability `eta`, global draw otherwise.
    Mixture {
        eta: f64,
        qubits: usize,
    },
    /// Setting `m` uses entry `m` of the list.
    Fixed(Arc<Vec<CMatrix>>),
}

impl EnsembleSpec {
    pub fn fixed(unitaries: Vec<CMatrix>) -> Self {
        EnsembleSpec::Fixed(Arc::new(unitaries))
    }

    pub fn dim(&self) -> usize {
        match self {
            EnsembleSpec::GlobalHaar { dim } => *dim,
            EnsembleSpec::LocalHaarTensor { qubits } | EnsembleSpec::Mixture { qubits, .. } => {
                1usize.checked_shl(*qubits as u32).unwrap_or(0)
            }
            EnsembleSpec::Fixed(list) => list.first().map_or(0, |u| u.nrows()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnsembleSpec::GlobalHaar { dim } if *dim < 2 => Err(Error::InvalidArgument(format!(
                "global Haar needs D >= 2, got {dim}"
            ))),
            EnsembleSpec::LocalHaarTensor { qubits } | EnsembleSpec::Mixture { qubits, .. }
                if *qubits < 1 || *qubits > 16 =>
            {
                Err(Error::InvalidArgument(format!(
                    "qubit count {qubits} out of range"
                )))
            }
            EnsembleSpec::Mixture { eta, .. } if !(0.0..=1.0).contains(eta) => Err(
                Error::InvalidArgument(format!("mixture eta {eta} outside [0, 1]")),
            ),
            EnsembleSpec::Fixed(list) => {
                let d = self.dim();
                if list.is_empty() {
                    return Err(Error::Empty("fixed ensemble has no unitaries"));
                }
                for u in list.iter() {
                    if u.nrows() != d || u.ncols() != d {
                        return Err(Error::DimMismatch {
                            expected: d,
                            found: u.nrows(),
                        });
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A drawn unitary and whether it came from the tensor-product component.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledUnitary {
    pub unitary: CMatrix,
    pub local: bool,
}

fn standard_complex_normal(rng: &mut RngStream) -> crate::linalg::C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unitary via QR of a complex Ginibre matrix, with the phases of
/// `R`'s diagonal folded back into `Q`.
pub fn sample_global_haar(d: usize, rng: &mut RngStream) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "global Haar needs D >= 2, got {d}"
        )));
    }
    let z = CMatrix::from_fn(d, d, |_, _| standard_complex_normal(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Kronecker product of `n` independent qubit Haar unitaries; qubit 0 is the
/// leftmost factor.
pub fn sample_local_haar_tensor(n: usize, rng: &mut RngStream) -> Result<CMatrix> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "local Haar tensor needs n >= 1".into(),
        ));
    }
    let mut u = sample_global_haar(2, rng)?;
    for _ in 1..n {
        let next = sample_global_haar(2, rng)?;
        u = u.kronecker(&next);
    }
    Ok(u)
}

/// Unit vector uniform on the complex sphere in `C^d`.
pub fn sample_haar_vector(d: usize, rng: &mut RngStream) -> Result<CVector> {
    if d < 1 {
        return Err(Error::InvalidArgument(
            "vector dimension must be positive".into(),
        ));
    }
    loop {
        let v = CVector::from_fn(d, |_, _| standard_complex_normal(rng));
        let n = v.norm();
        if n > 0.0 {
            return Ok(v.unscale(n));
        }
    }
}

/// One draw from `spec`. Mixture coins come from a sibling stream, so the
/// global draw at `eta = 0` is identical to a plain global-Haar draw.
pub fn sample_unitary(spec: &EnsembleSpec, rng: &mut RngStream) -> Result<SampledUnitary> {
    match spec {
        EnsembleSpec::GlobalHaar { dim } => Ok(SampledUnitary {
            unitary: sample_global_haar(*dim, rng)?,
            local: false,
        }),
        EnsembleSpec::LocalHaarTensor { qubits } => Ok(SampledUnitary {
            unitary: sample_local_haar_tensor(*qubits, rng)?,
            local: true,
        }),
        EnsembleSpec::Mixture { eta, qubits } => {
            if !(0.0..=1.0).contains(eta) {
                return Err(Error::InvalidArgument(format!(
                    "mixture eta {eta} outside [0, 1]"
                )));
            }
            let mut coin = rng.fork(domain::MIXTURE_COIN);
            let local = coin.random::<f64>() < *eta;
            if local {
                Ok(SampledUnitary {
                    unitary: sample_local_haar_tensor(*qubits, rng)?,
                    local: true,
                })
            } else {
                Ok(SampledUnitary {
                    unitary: sample_global_haar(1 << qubits, rng)?,
                    local: false,
                })
            }
        }
        EnsembleSpec::Fixed(list) => {
            let index = usize::try_from(rng.measurement()).unwrap_or(usize::MAX);
            list.get(index)
                .map(|u| SampledUnitary {
                    unitary: u.clone(),
                    local: false,
                })
                .ok_or(Error::EnsembleExhausted {
                    index,
                    len: list.len(),
                })
        }
    }
}

pub fn povm_from_unitary(u: CMatrix) -> Result<RankOnePovm> {
    RankOnePovm::new(u)
}
