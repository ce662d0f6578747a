//! States, observables, rank-1 POVMs and the diagnostics computed on them.

use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    c, from_spectrum, hermitian_deviation, hermitian_eigenvalues, hermitian_eigh, hermitize, outer,
    trace, unitarity_deviation, CMatrix, CVector,
};
use crate::measurement::MeasurementRecord;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const SHADOW_HERMITIAN_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-8;
const PROB_FLOOR: f64 = 1e-12;

/// Anything that can be read as a square complex matrix.
pub trait Operator {
    fn matrix(&self) -> &CMatrix;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }
}

impl Operator for CMatrix {
    fn matrix(&self) -> &CMatrix {
        self
    }
}

/// A quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "density matrix must be square and non-empty".into(),
            ));
        }
        let dev = hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::NonHermitian(format!(
                "density matrix deviates by {dev:e}"
            )));
        }
        let tr = trace(&entries);
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min_eig = hermitian_eigenvalues(&entries)[0];
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { entries })
    }

    /// `|ψ⟩⟨ψ|` for a vector normalized here.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        Self::new(hermitize(&outer(&(psi / c(norm, 0.0)))))
    }

    /// `e_k e_k†` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} out of range for dim {d}"
            )));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = c(1.0, 0.0);
        Self::new(m)
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Self::new(CMatrix::identity(d, d) * c(1.0 / d as f64, 0.0))
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }
}

impl Operator for DensityMatrix {
    fn matrix(&self) -> &CMatrix {
        &self.entries
    }
}

/// Which estimator produced a shadow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodTag {
    Ls,
    Rls,
    Cs,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Ls => "LS",
            MethodTag::Rls => "RLS",
            MethodTag::Cs => "CS",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hermitian point estimate of a state. May be indefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowEstimate {
    entries: CMatrix,
    method: MethodTag,
}

impl ShadowEstimate {
    /// Wraps a matrix, symmetrizing it. Fails if the input is further than
    /// `1e-10` (relative to its scale) from Hermitian.
    pub fn new(entries: CMatrix, method: MethodTag) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "shadow must be square and non-empty".into(),
            ));
        }
        let dev = hermitian_deviation(&entries);
        let scale = entries.norm().max(1.0);
        if dev > SHADOW_HERMITIAN_TOL * scale {
            return Err(Error::NonHermitian(format!("shadow deviates by {dev:e}")));
        }
        Ok(Self {
            entries: hermitize(&entries),
            method,
        })
    }

    pub(crate) fn from_hermitian(entries: CMatrix, method: MethodTag) -> Self {
        debug_assert!(
            hermitian_deviation(&entries) <= SHADOW_HERMITIAN_TOL * entries.norm().max(1.0)
        );
        Self { entries, method }
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    pub fn trace(&self) -> f64 {
        trace(&self.entries).re
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }
}

impl Operator for ShadowEstimate {
    fn matrix(&self) -> &CMatrix {
        &self.entries
    }
}

/// Hermitian observable, optionally carrying the unit vector of a rank-1
/// projector `φφ†`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    entries: CMatrix,
    vector: Option<CVector>,
}

impl Observable {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "observable must be square and non-empty".into(),
            ));
        }
        let dev = hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::NonHermitian(format!(
                "observable deviates by {dev:e}"
            )));
        }
        Ok(Self {
            entries,
            vector: None,
        })
    }

    /// `φφ†` for a unit vector `φ`.
    pub fn rank_one(phi: CVector) -> Result<Self> {
        let norm = phi.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "rank-1 observable vector has norm {norm}"
            )));
        }
        Ok(Self {
            entries: hermitize(&outer(&phi)),
            vector: Some(phi),
        })
    }

    pub fn vector(&self) -> Option<&CVector> {
        self.vector.as_ref()
    }
}

impl Operator for Observable {
    fn matrix(&self) -> &CMatrix {
        &self.entries
    }
}

/// Rank-1 orthonormal POVM `{u_k u_k†}` where `u_k†` is row `k` of `U`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOnePovm {
    unitary: CMatrix,
}

impl RankOnePovm {
    pub fn new(unitary: CMatrix) -> Result<Self> {
        if !unitary.is_square() || unitary.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "POVM unitary must be square and non-empty".into(),
            ));
        }
        let deviation = unitarity_deviation(&unitary);
        if !(deviation <= UNITARY_TOL) {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(Self { unitary })
    }

    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    /// Number of outcomes. Equal to the dimension for orthonormal POVMs.
    pub fn outcomes(&self) -> usize {
        self.unitary.nrows()
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    /// `u_k`, the conjugate transpose of row `k`.
    pub fn vector(&self, k: usize) -> CVector {
        self.unitary.row(k).adjoint()
    }

    /// `A_k = u_k u_k†`.
    pub fn element(&self, k: usize) -> CMatrix {
        outer(&self.vector(k))
    }
}

/// Born-rule outcome probabilities `p_k = u_k† ρ u_k`, the diagonal of `UρU†`.
pub fn born_probabilities(povm: &RankOnePovm, state: &DensityMatrix) -> Result<Vec<f64>> {
    check_dim(povm.dim(), state.dim())?;
    let u = povm.unitary();
    let rotated = u * state.matrix() * u.adjoint();
    let mut p: Vec<f64> = (0..povm.outcomes())
        .map(|k| rotated[(k, k)].re.clamp(0.0, 1.0))
        .collect();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    Ok(p)
}

/// `Re tr(Λ·X)`, rejecting inputs where the imaginary part is not negligible.
pub fn expectation<O: Operator + ?Sized>(obs: &Observable, op: &O) -> Result<f64> {
    check_dim(obs.dim(), op.dim())?;
    let a = obs.matrix();
    let b = op.matrix();
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    if acc.im.abs() >= 1e-9 {
        return Err(Error::NonHermitian(format!(
            "tr(ΛX) has imaginary part {:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// `‖A − B‖_F`.
pub fn frobenius_error<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: Operator + ?Sized,
    B: Operator + ?Sized,
{
    check_dim(a.dim(), b.dim())?;
    Ok((a.matrix() - b.matrix()).norm())
}

fn require_hermitian(m: &CMatrix) -> Result<()> {
    let dev = hermitian_deviation(m);
    if dev > SHADOW_HERMITIAN_TOL * m.norm().max(1.0) {
        return Err(Error::NonHermitian(format!("input deviates by {dev:e}")));
    }
    Ok(())
}

/// Sums of the positive and of the negative eigenvalues.
pub fn eigenvalue_split<O: Operator + ?Sized>(op: &O) -> Result<(f64, f64)> {
    require_hermitian(op.matrix())?;
    let eig = hermitian_eigenvalues(op.matrix());
    let pos = eig.iter().filter(|&&x| x > 0.0).sum();
    let neg = eig.iter().filter(|&&x| x < 0.0).sum();
    Ok((pos, neg))
}

/// Projects a unit-trace spectrum onto the probability simplex, keeping the
/// order of the input. This is the eigenvalue truncation that yields the
/// closest state in Frobenius norm.
pub(crate) fn truncate_spectrum(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut kept = sorted.len();
    let mut deficit = 0.0;
    while kept > 0 && sorted[kept - 1] + deficit / (kept as f64) < 0.0 {
        deficit += sorted[kept - 1];
        sorted[kept - 1] = 0.0;
        kept -= 1;
    }
    let shift = if kept > 0 { deficit / kept as f64 } else { 0.0 };
    for x in sorted.iter_mut().take(kept) {
        *x += shift;
    }

    let mut out = vec![0.0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = sorted[pos];
    }
    out
}

/// Closest density matrix (Frobenius norm) to the trace-normalized input.
pub fn project_physical<O: Operator + ?Sized>(op: &O) -> Result<DensityMatrix> {
    let m = op.matrix();
    require_hermitian(m)?;
    let tr = trace(m).re;
    if !((tr - 1.0).abs() <= 0.5) {
        return Err(Error::TraceOutOfRange { trace: tr });
    }
    let normalized = hermitize(m) / c(tr, 0.0);
    let (values, vectors) = hermitian_eigh(&normalized);
    let total: f64 = values.iter().sum();
    let shifted: Vec<f64> = values
        .iter()
        .map(|v| v + (1.0 - total) / values.len() as f64)
        .collect();
    let mut projected = truncate_spectrum(&shifted);
    let s: f64 = projected.iter().sum();
    projected.iter_mut().for_each(|x| *x /= s);
    let rho = from_spectrum(&projected, &vectors);
    let tr = trace(&rho).re;
    DensityMatrix::new(rho * c(1.0 / tr, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLikelihood {
    /// `(1/M) Σ_m Σ_k f_{m,k} log tr(A_{m,k} ρ)`.
    pub value: f64,
    /// How many `(m, k)` terms with nonzero counts had their probability
    /// floored at `1e-12`.
    pub floored: usize,
}

/// Average log-likelihood of the records under a physical state.
pub fn log_likelihood(
    records: &[MeasurementRecord],
    rho_phy: &DensityMatrix,
) -> Result<LogLikelihood> {
    if records.is_empty() {
        return Err(Error::Empty("log-likelihood needs at least one record"));
    }
    let mut total = 0.0;
    let mut floored = 0;
    for rec in records {
        let probs = born_probabilities(rec.povm(), rho_phy)?;
        for (&f, &p) in rec.counts().iter().zip(&probs) {
            if f == 0 {
                continue;
            }
            let p = if p < PROB_FLOOR {
                floored += 1;
                PROB_FLOOR
            } else {
                p
            };
            total += f as f64 * p.ln();
        }
    }
    Ok(LogLikelihood {
        value: total / records.len() as f64,
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            values.len(),
            values.iter().map(|&v| c(v, 0.0)),
        ))
    }

    fn phi1(d: usize) -> CVector {
        let mut v = CVector::from_element(d, c(1.0 / (2.0 * (d as f64 - 1.0)).sqrt(), 0.0));
        v[0] = c(1.0 / 2f64.sqrt(), 0.0);
        v
    }

    #[test]
    fn born_identity_basis() {
        let povm = RankOnePovm::new(CMatrix::identity(4, 4)).unwrap();
        let rho = DensityMatrix::basis(4, 0).unwrap();
        assert_eq!(
            born_probabilities(&povm, &rho).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn born_maximally_mixed_is_uniform() {
        let h = 1.0 / 2f64.sqrt();
        let u = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)]);
        let povm = RankOnePovm::new(u).unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        for p in born_probabilities(&povm, &rho).unwrap() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn born_overlap_with_phi1_is_half() {
        // Orthonormal basis whose first row is φ₁†.
        let d = 32;
        let phi = phi1(d);
        let mut cols = vec![phi.clone()];
        for j in 1..d {
            let mut e = CVector::zeros(d);
            e[j] = c(1.0, 0.0);
            cols.push(e);
        }
        let mut q = CMatrix::from_columns(&cols);
        // Gram-Schmidt keeps the first column fixed.
        for j in 0..d {
            for i in 0..j {
                let proj = q.column(i).dotc(&q.column(j));
                let ci = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &ci, c(1.0, 0.0));
            }
            let n = q.column(j).norm();
            q.column_mut(j).unscale_mut(n);
        }
        let povm = RankOnePovm::new(q.adjoint()).unwrap();
        let rho = DensityMatrix::basis(d, 0).unwrap();
        let p = born_probabilities(&povm, &rho).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn born_rejects_dimension_mismatch() {
        let povm = RankOnePovm::new(CMatrix::identity(2, 2)).unwrap();
        let rho = DensityMatrix::basis(4, 0).unwrap();
        assert!(matches!(
            born_probabilities(&povm, &rho),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn expectation_ground_truths() {
        let d = 8;
        let rho = DensityMatrix::basis(d, 0).unwrap();
        let mut e0 = CVector::zeros(d);
        e0[0] = c(1.0, 0.0);
        let mut e1 = CVector::zeros(d);
        e1[1] = c(1.0, 0.0);
        let l0 = Observable::rank_one(e0).unwrap();
        let l2 = Observable::rank_one(e1).unwrap();
        assert!((expectation(&l0, &rho).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&l2, &rho).unwrap().abs() < 1e-15);
        let id = Observable::new(CMatrix::identity(d, d)).unwrap();
        let mixed = DensityMatrix::maximally_mixed(d).unwrap();
        assert!((expectation(&id, &mixed).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expectation_rejects_complex_trace() {
        let obs = Observable::new(diag(&[1.0, 0.0])).unwrap();
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.0, 1.0);
        assert!(matches!(expectation(&obs, &m), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn frobenius_examples() {
        let a = diag(&[1.0, 0.0]);
        let b = diag(&[0.0, 1.0]);
        assert_eq!(frobenius_error(&a, &a).unwrap(), 0.0);
        assert!((frobenius_error(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let half = diag(&[0.5, 0.5]);
        assert!((frobenius_error(&a, &half).unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(frobenius_error(&a, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn eigenvalue_split_examples() {
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        let (p, n) = eigenvalue_split(&rho).unwrap();
        assert!((p - 1.0).abs() < 1e-12 && n == 0.0);

        let d = 32;
        let mut m = CMatrix::identity(d, d) * c(-1.0, 0.0);
        m[(0, 0)] += c(d as f64 + 1.0, 0.0);
        let (p, n) = eigenvalue_split(&m).unwrap();
        assert!((p - 32.0).abs() < 1e-9);
        assert!((n + 31.0).abs() < 1e-9);

        let (p, n) = eigenvalue_split(&diag(&[2.0, -1.0])).unwrap();
        assert!((p - 2.0).abs() < 1e-12 && (n + 1.0).abs() < 1e-12);

        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 1)] = c(1.0, 0.0);
        assert!(eigenvalue_split(&bad).is_err());
    }

    #[test]
    fn projection_fixed_point_and_truncation() {
        let rho = DensityMatrix::new(diag(&[0.7, 0.2, 0.1])).unwrap();
        let out = project_physical(&rho).unwrap();
        assert!(frobenius_error(&out, &rho).unwrap() < 1e-10);

        let out = project_physical(&diag(&[1.5, -0.5])).unwrap();
        assert!(frobenius_error(&out, &diag(&[1.0, 0.0])).unwrap() < 1e-12);

        let out = project_physical(&diag(&[2.0, -1.0])).unwrap();
        assert!(frobenius_error(&out, &diag(&[1.0, 0.0])).unwrap() < 1e-12);
    }

    #[test]
    fn projection_rejects_bad_trace() {
        assert!(matches!(
            project_physical(&diag(&[3.0, 0.0])),
            Err(Error::TraceOutOfRange { .. })
        ));
    }

    #[test]
    fn truncate_spectrum_matches_sorting_projection() {
        // Simplex projection oracle: the optimum is max(v - θ, 0) with θ
        // chosen by bisection so the result sums to one.
        let v = [0.9, 0.4, -0.1, -0.2];
        let out = truncate_spectrum(&v);
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = v.iter().map(|x| (x - mid).max(0.0)).sum();
            if s > 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        for (a, x) in out.iter().zip(v) {
            assert!((a - (x - lo).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_likelihood_examples() {
        use crate::measurement::MeasurementRecord;
        let d = 4;
        let povm = RankOnePovm::new(CMatrix::identity(d, d)).unwrap();
        let rec = MeasurementRecord::new(povm, vec![5, 0, 0, 0]).unwrap();
        let pure = DensityMatrix::basis(d, 0).unwrap();
        let ll = log_likelihood(std::slice::from_ref(&rec), &pure).unwrap();
        assert!(ll.value.abs() < 1e-15 && ll.floored == 0);

        let mixed = DensityMatrix::maximally_mixed(d).unwrap();
        let ll = log_likelihood(std::slice::from_ref(&rec), &mixed).unwrap();
        assert!((ll.value - 5.0 * (0.25f64).ln()).abs() < 1e-12);

        let twice = log_likelihood(&[rec.clone(), rec.clone()], &mixed).unwrap();
        assert!((twice.value - ll.value).abs() < 1e-12);

        let other = DensityMatrix::basis(d, 1).unwrap();
        let ll = log_likelihood(std::slice::from_ref(&rec), &other).unwrap();
        assert_eq!(ll.floored, 1);
        assert!((ll.value - 5.0 * PROB_FLOOR.ln()).abs() < 1e-9);

        assert!(matches!(log_likelihood(&[], &mixed), Err(Error::Empty(_))));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(diag(&[0.6, 0.6])).is_err());
        assert!(DensityMatrix::new(diag(&[1.2, -0.2])).is_err());
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }
}
