//! LS, RLS and CS shadows.
//!
//! Each estimator maps the per-setting operator `A_m†(p̂_m)` to a shadow and
//! averages the shadows. LS applies the pseudoinverse of the empirical frame
//! operator `(1/M) A†A`, RLS the inverse of `(1/M)(A†A + μI)`, and CS the
//! analytic inverse of the global-Haar channel.
//!
//! The frame operator maps Hermitian matrices to Hermitian matrices, so it is
//! stored as a real symmetric D²×D² matrix in the orthonormal Hermitian basis
//! of [`crate::linalg`]. The complex vec-basis matrix is available through
//! [`FrameOperator::to_complex_matrix`] and has the same spectrum.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    c, herm_to_real, hermitian_basis_matrix, hermitian_deviation, projector_to_real, real_to_herm,
    trace, CMatrix, RMatrix,
};
use crate::measurement::{record_adjoint, MeasurementRecord};
use crate::quantum::{MethodTag, RankOnePovm, ShadowEstimate};

pub const DEFAULT_RCOND: f64 = 1e-10;
pub const DEFAULT_MU: f64 = 0.1;

/// Columns accumulated per rank-k update while building a frame.
const FRAME_CHUNK: usize = 2048;

/// `(1/M) Σ_{m,k} vec(A_{m,k}) vec(A_{m,k})†` in real Hermitian coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOperator {
    dim: usize,
    settings: usize,
    real: RMatrix,
}

impl FrameOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    /// Real symmetric D²×D² representation.
    pub fn real_matrix(&self) -> &RMatrix {
        &self.real
    }

    /// Matrix on column-major `vec(X)`.
    pub fn to_complex_matrix(&self) -> CMatrix {
        let t = hermitian_basis_matrix(self.dim);
        let fr = self.real.map(|x| c(x, 0.0));
        &t * fr * t.adjoint()
    }

    /// `X ↦ (1/M) Σ ⟨A_{m,k}, X⟩ A_{m,k}` for Hermitian `X`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        check_dim(self.dim, x.nrows())?;
        let v = &self.real * herm_to_real(x);
        Ok(real_to_herm(v.as_slice(), self.dim))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.real.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn trace(&self) -> f64 {
        self.real.trace()
    }
}

pub fn build_frame_operator(povms: &[RankOnePovm]) -> Result<FrameOperator> {
    let first = povms
        .first()
        .ok_or(Error::Empty("frame operator needs at least one POVM"))?;
    let d = first.dim();
    for p in povms {
        check_dim(d, p.dim())?;
    }
    let n = d * d;
    let columns = povms.len() * first.outcomes();
    let chunk = FRAME_CHUNK.min(columns).max(1);
    let mut frame = RMatrix::zeros(n, n);
    let mut block = RMatrix::zeros(n, chunk);
    let mut filled = 0;
    let scale = 1.0 / povms.len() as f64;

    let flush = |block: &RMatrix, filled: usize, frame: &mut RMatrix| {
        let cols = block.columns(0, filled);
        let t = cols.transpose();
        frame.gemm(scale, &cols, &t, 1.0);
    };

    for povm in povms {
        for k in 0..povm.outcomes() {
            let u = povm.vector(k);
            let mut col = block.column_mut(filled);
            projector_to_real(&u, col.as_mut_slice());
            filled += 1;
            if filled == chunk {
                flush(&block, filled, &mut frame);
                filled = 0;
            }
        }
    }
    if filled > 0 {
        flush(&block, filled, &mut frame);
    }
    let sym = (&frame + frame.transpose()) * 0.5;
    Ok(FrameOperator {
        dim: d,
        settings: povms.len(),
        real: sym,
    })
}

fn check_partial(frame: &FrameOperator, partial: &CMatrix) -> Result<()> {
    check_dim(frame.dim, partial.nrows())?;
    check_dim(frame.dim, partial.ncols())?;
    let dev = hermitian_deviation(partial);
    if dev > 1e-10 * partial.norm().max(1.0) {
        return Err(Error::NonHermitian(format!(
            "partial operator deviates by {dev:e}"
        )));
    }
    Ok(())
}

fn apply_real(op: &RMatrix, partials: &[CMatrix], d: usize, tag: MethodTag) -> Vec<ShadowEstimate> {
    if partials.is_empty() {
        return Vec::new();
    }
    let mut rhs = RMatrix::zeros(d * d, partials.len());
    for (j, p) in partials.iter().enumerate() {
        rhs.set_column(j, &herm_to_real(p));
    }
    let sol = op * rhs;
    (0..partials.len())
        .map(|j| ShadowEstimate::from_hermitian(real_to_herm(sol.column(j).as_slice(), d), tag))
        .collect()
}

/// Pseudoinverse of a frame, factorized once.
#[derive(Clone, Debug)]
pub struct LsSolver {
    dim: usize,
    pinv: RMatrix,
    rank: usize,
}

impl LsSolver {
    /// Eigenvalues at or below `rcond · λ_max` are discarded.
    pub fn new(frame: &FrameOperator, rcond: f64) -> Result<Self> {
        if !(rcond > 0.0 && rcond < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rcond {rcond} outside (0, 1)"
            )));
        }
        let eig = SymmetricEigen::new(frame.real.clone());
        let lmax = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        if !(lmax > 0.0) {
            return Err(Error::ZeroFrame);
        }
        let cutoff = rcond * lmax;
        let n = frame.real.nrows();
        let mut scaled = eig.eigenvectors.clone();
        let mut rank = 0;
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let w = if lam > cutoff {
                rank += 1;
                1.0 / lam
            } else {
                0.0
            };
            scaled.column_mut(j).scale_mut(w);
        }
        let mut pinv = RMatrix::zeros(n, n);
        pinv.gemm(1.0, &scaled, &eig.eigenvectors.transpose(), 0.0);
        let pinv = (&pinv + pinv.transpose()) * 0.5;
        log::debug!(
            "LS pseudoinverse: D = {}, rank {rank} of {n}, cutoff {cutoff:e}",
            frame.dim
        );
        Ok(Self {
            dim: frame.dim,
            pinv,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn apply(&self, partials: &[CMatrix]) -> Vec<ShadowEstimate> {
        apply_real(&self.pinv, partials, self.dim, MethodTag::Ls)
    }
}

/// Inverse of `frame + (μ/M) I`, factorized once.
#[derive(Clone, Debug)]
pub struct RlsSolver {
    dim: usize,
    factor: RlsFactor,
}

#[derive(Clone, Debug)]
enum RlsFactor {
    Cholesky(Cholesky<f64, nalgebra::Dyn>),
    Inverse(RMatrix),
}

impl RlsSolver {
    pub fn new(frame: &FrameOperator, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mu {mu} must be finite and >= 0"
            )));
        }
        if mu == 0.0 {
            let eig = SymmetricEigen::new(frame.real.clone());
            let lmax = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
            let lmin = eig
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if !(lmax > 0.0) || lmin <= DEFAULT_RCOND * lmax {
                return Err(Error::SingularFrame);
            }
            let mut scaled = eig.eigenvectors.clone();
            for (j, &lam) in eig.eigenvalues.iter().enumerate() {
                scaled.column_mut(j).scale_mut(1.0 / lam);
            }
            let inv = &scaled * eig.eigenvectors.transpose();
            return Ok(Self {
                dim: frame.dim,
                factor: RlsFactor::Inverse((&inv + inv.transpose()) * 0.5),
            });
        }
        let n = frame.real.nrows();
        let shifted = &frame.real + RMatrix::identity(n, n) * (mu / frame.settings as f64);
        let chol = Cholesky::new(shifted).ok_or(Error::SingularFrame)?;
        Ok(Self {
            dim: frame.dim,
            factor: RlsFactor::Cholesky(chol),
        })
    }

    pub fn apply(&self, partials: &[CMatrix]) -> Vec<ShadowEstimate> {
        match &self.factor {
            RlsFactor::Inverse(inv) => apply_real(inv, partials, self.dim, MethodTag::Rls),
            RlsFactor::Cholesky(chol) => {
                let d = self.dim;
                let mut rhs = RMatrix::zeros(d * d, partials.len());
                for (j, p) in partials.iter().enumerate() {
                    rhs.set_column(j, &herm_to_real(p));
                }
                chol.solve_mut(&mut rhs);
                (0..partials.len())
                    .map(|j| {
                        ShadowEstimate::from_hermitian(
                            real_to_herm(rhs.column(j).as_slice(), d),
                            MethodTag::Rls,
                        )
                    })
                    .collect()
            }
        }
    }
}

/// `(frame)⁺ · partial`.
pub fn ls_shadow(frame: &FrameOperator, partial: &CMatrix, rcond: f64) -> Result<ShadowEstimate> {
    check_partial(frame, partial)?;
    let solver = LsSolver::new(frame, rcond)?;
    Ok(solver.apply(std::slice::from_ref(partial)).remove(0))
}

/// `(frame + (μ/M) I)⁻¹ · partial`.
pub fn rls_shadow(frame: &FrameOperator, mu: f64, partial: &CMatrix) -> Result<ShadowEstimate> {
    check_partial(frame, partial)?;
    let solver = RlsSolver::new(frame, mu)?;
    Ok(solver.apply(std::slice::from_ref(partial)).remove(0))
}

/// Global-Haar measurement channel `X ↦ (X + tr(X) I)/(D + 1)`.
pub fn cs_channel_apply(op: &CMatrix) -> CMatrix {
    let d = op.nrows();
    let tr = trace(op);
    (op + CMatrix::identity(d, d) * tr) / c(d as f64 + 1.0, 0.0)
}

/// Inverse channel `X ↦ (D + 1) X − tr(X) I`.
pub fn cs_channel_inverse(op: &CMatrix) -> CMatrix {
    let d = op.nrows();
    let tr = trace(op);
    op * c(d as f64 + 1.0, 0.0) - CMatrix::identity(d, d) * tr
}

/// Classical shadow `(D + 1) A†(p̂) − I` of one record.
pub fn cs_shadow(rec: &MeasurementRecord) -> ShadowEstimate {
    let d = rec.dim();
    let adj = record_adjoint(rec);
    // tr(A†(p̂)) = Σ p̂_k = 1
    let shadow = adj * c(d as f64 + 1.0, 0.0) - CMatrix::identity(d, d);
    ShadowEstimate::from_hermitian(shadow, MethodTag::Cs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShadowMethod {
    Ls { rcond: f64 },
    Rls { mu: f64 },
    Cs,
}

impl ShadowMethod {
    pub fn ls() -> Self {
        ShadowMethod::Ls {
            rcond: DEFAULT_RCOND,
        }
    }

    pub fn rls() -> Self {
        ShadowMethod::Rls { mu: DEFAULT_MU }
    }

    pub fn tag(&self) -> MethodTag {
        match self {
            ShadowMethod::Ls { .. } => MethodTag::Ls,
            ShadowMethod::Rls { .. } => MethodTag::Rls,
            ShadowMethod::Cs => MethodTag::Cs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ShadowMethod::Ls { rcond } if !(rcond > 0.0 && rcond < 1.0) => Err(
                Error::InvalidArgument(format!("rcond {rcond} outside (0, 1)")),
            ),
            ShadowMethod::Rls { mu } if !(mu >= 0.0 && mu.is_finite()) => Err(
                Error::InvalidArgument(format!("mu {mu} must be finite and >= 0")),
            ),
            _ => Ok(()),
        }
    }
}

/// Per-record shadows and their mean.
#[derive(Clone, Debug)]
pub struct ShadowSet {
    pub shadows: Vec<ShadowEstimate>,
    pub average: ShadowEstimate,
}

fn mean(shadows: &[ShadowEstimate], tag: MethodTag) -> ShadowEstimate {
    use crate::quantum::Operator;
    let d = shadows[0].dim();
    let mut acc = CMatrix::zeros(d, d);
    for s in shadows {
        acc += s.matrix();
    }
    ShadowEstimate::from_hermitian(acc / c(shadows.len() as f64, 0.0), tag)
}

/// Builds one shadow per record with `method` and averages them. LS and RLS
/// build a single frame from these records and reuse its factorization.
pub fn estimate(records: &[MeasurementRecord], method: ShadowMethod) -> Result<ShadowSet> {
    method.validate()?;
    let first = records
        .first()
        .ok_or(Error::Empty("estimate needs at least one record"))?;
    let d = first.dim();
    for r in records {
        check_dim(d, r.dim())?;
    }
    let shadows = match method {
        ShadowMethod::Cs => records.iter().map(cs_shadow).collect::<Vec<_>>(),
        ShadowMethod::Ls { rcond } => {
            let povms: Vec<RankOnePovm> = records.iter().map(|r| r.povm().clone()).collect();
            let frame = build_frame_operator(&povms)?;
            let partials: Vec<CMatrix> = records.iter().map(record_adjoint).collect();
            LsSolver::new(&frame, rcond)?.apply(&partials)
        }
        ShadowMethod::Rls { mu } => {
            let povms: Vec<RankOnePovm> = records.iter().map(|r| r.povm().clone()).collect();
            let frame = build_frame_operator(&povms)?;
            let partials: Vec<CMatrix> = records.iter().map(record_adjoint).collect();
            RlsSolver::new(&frame, mu)?.apply(&partials)
        }
    };
    let average = mean(&shadows, method.tag());
    Ok(ShadowSet { shadows, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_global_haar;
    use crate::linalg::{hermitian_eigenvalues, hermitize, outer, CVector};
    use crate::quantum::Operator;
    use crate::rng::RngStream;

    fn haar_povms(d: usize, m: usize, seed: u64) -> Vec<RankOnePovm> {
        (0..m)
            .map(|i| {
                RankOnePovm::new(
                    sample_global_haar(d, &mut RngStream::new(seed, 0, i as u64)).unwrap(),
                )
                .unwrap()
            })
            .collect()
    }

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            values.len(),
            values.iter().map(|&v| c(v, 0.0)),
        ))
    }

    #[test]
    fn identity_povm_frame_is_diagonal_projector() {
        // Hand construction: vec(e0e0†) = (1,0,0,0), vec(e1e1†) = (0,0,0,1).
        let frame =
            build_frame_operator(&[RankOnePovm::new(CMatrix::identity(2, 2)).unwrap()]).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 0)] = c(1.0, 0.0);
        expected[(3, 3)] = c(1.0, 0.0);
        assert!((frame.to_complex_matrix() - expected).norm() < 1e-14);
        let eig = frame.eigenvalues();
        for (a, b) in eig.iter().zip([0.0, 0.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicated_povms_give_same_frame() {
        let povms = haar_povms(3, 4, 1);
        let single = build_frame_operator(&povms[..1]).unwrap();
        let dup = build_frame_operator(&vec![povms[0].clone(); 7]).unwrap();
        assert!((single.real_matrix() - dup.real_matrix()).amax() < 1e-14);
    }

    #[test]
    fn frame_is_psd_with_trace_d() {
        let frame = build_frame_operator(&haar_povms(4, 9, 2)).unwrap();
        assert!((frame.trace() - 4.0).abs() < 1e-8);
        assert!(frame.eigenvalues()[0] > -1e-10);
        let fc = frame.to_complex_matrix();
        assert!(hermitian_deviation(&fc) < 1e-12);
    }

    #[test]
    fn frame_apply_matches_definition() {
        let povms = haar_povms(3, 5, 3);
        let frame = build_frame_operator(&povms).unwrap();
        let x = hermitize(&CMatrix::from_fn(3, 3, |i, j| {
            c((i + 2 * j) as f64, (i * j) as f64 - 1.0)
        }));
        let mut direct = CMatrix::zeros(3, 3);
        for p in &povms {
            for k in 0..3 {
                let a = p.element(k);
                direct += &a * trace(&(a.adjoint() * &x));
            }
        }
        direct /= c(povms.len() as f64, 0.0);
        assert!((frame.apply(&x).unwrap() - direct).norm() < 1e-12);
    }

    #[test]
    fn ls_projector_frame_examples() {
        let frame =
            build_frame_operator(&[RankOnePovm::new(CMatrix::identity(2, 2)).unwrap()]).unwrap();
        let s = ls_shadow(&frame, &diag(&[1.0, 0.0]), DEFAULT_RCOND).unwrap();
        assert!((s.matrix() - diag(&[1.0, 0.0])).norm() < 1e-14);
        let z = ls_shadow(&frame, &CMatrix::zeros(2, 2), DEFAULT_RCOND).unwrap();
        assert_eq!(z.matrix().norm(), 0.0);
    }

    #[test]
    fn zero_frame_rejected() {
        let frame = FrameOperator {
            dim: 2,
            settings: 1,
            real: RMatrix::zeros(4, 4),
        };
        assert!(matches!(
            LsSolver::new(&frame, DEFAULT_RCOND),
            Err(Error::ZeroFrame)
        ));
    }

    #[test]
    fn rls_mu_zero_matches_ls_when_invertible() {
        let frame = build_frame_operator(&haar_povms(2, 6, 4)).unwrap();
        let partial = outer(&CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]));
        let ls = ls_shadow(&frame, &partial, DEFAULT_RCOND).unwrap();
        let rls = rls_shadow(&frame, 0.0, &partial).unwrap();
        assert!((ls.matrix() - rls.matrix()).norm() < 1e-8);
    }

    #[test]
    fn rls_singular_frame_with_zero_mu() {
        let frame = build_frame_operator(&haar_povms(4, 2, 5)).unwrap();
        let partial = diag(&[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            rls_shadow(&frame, 0.0, &partial),
            Err(Error::SingularFrame)
        ));
        assert!(rls_shadow(&frame, 0.1, &partial).is_ok());
    }

    #[test]
    fn rls_large_mu_shrinks_to_zero() {
        let frame = build_frame_operator(&haar_povms(4, 3, 6)).unwrap();
        let partial = diag(&[1.0, 0.0, 0.0, 0.0]);
        let s = rls_shadow(&frame, 1e6, &partial).unwrap();
        assert!(s.matrix().norm() < 1e-3);
    }

    #[test]
    fn rls_matches_dense_solver_oracle() {
        // Complete settings: the three Pauli eigenbases.
        let h = 1.0 / 2f64.sqrt();
        let x = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]);
        let y = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, -h), c(h, 0.0), c(0.0, h)]);
        let povms: Vec<RankOnePovm> = [CMatrix::identity(2, 2), x, y]
            .into_iter()
            .map(|u| RankOnePovm::new(u).unwrap())
            .collect();
        let frame = build_frame_operator(&povms).unwrap();
        let mu = 0.1;
        let partial = hermitize(&CMatrix::from_row_slice(
            2,
            2,
            &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)],
        ));
        let s = rls_shadow(&frame, mu, &partial).unwrap();

        // Oracle: complex vec-basis normal equations solved by LU.
        let mut fc = CMatrix::zeros(4, 4);
        for p in &povms {
            for k in 0..2 {
                let v = crate::linalg::vec(&p.element(k));
                fc += &v * v.adjoint();
            }
        }
        let m = povms.len() as f64;
        let lhs = (fc + CMatrix::identity(4, 4) * c(mu, 0.0)) / c(m, 0.0);
        let sol = lhs.lu().solve(&crate::linalg::vec(&partial)).unwrap();
        let expected = crate::linalg::unvec(&sol, 2);
        assert!((s.matrix() - expected).norm() < 1e-10);
    }

    #[test]
    fn channel_examples() {
        let mixed = CMatrix::identity(4, 4) / c(4.0, 0.0);
        assert!((cs_channel_apply(&mixed) - &mixed).norm() < 1e-15);
        assert!((cs_channel_inverse(&mixed) - &mixed).norm() < 1e-15);
        let e0 = diag(&[1.0, 0.0]);
        assert!((cs_channel_apply(&e0) - diag(&[2.0 / 3.0, 1.0 / 3.0])).norm() < 1e-15);
        assert!((cs_channel_inverse(&e0) - diag(&[2.0, -1.0])).norm() < 1e-15);
    }

    #[test]
    fn channel_inverse_round_trip_and_trace() {
        for s in 0..100u64 {
            let d = 2 + (s % 4) as usize;
            let x = hermitize(&CMatrix::from_fn(d, d, |i, j| {
                c(
                    ((s + 1) as f64 * (i as f64 + 0.3)).sin(),
                    ((j + 1) as f64 * (s as f64 + 0.7)).cos(),
                )
            }));
            let y = cs_channel_apply(&x);
            assert!((trace(&y) - trace(&x)).norm() < 1e-12);
            assert!((cs_channel_inverse(&y) - &x).camax() < 1e-12);
        }
    }

    #[test]
    fn cs_single_shot_spectrum() {
        let d = 8;
        for k in 0..d {
            let mut counts = vec![0; d];
            counts[k] = 1;
            let rec =
                MeasurementRecord::new(RankOnePovm::new(CMatrix::identity(d, d)).unwrap(), counts)
                    .unwrap();
            let s = cs_shadow(&rec);
            let mut expected = CMatrix::identity(d, d) * c(-1.0, 0.0);
            expected[(k, k)] = c(d as f64, 0.0);
            assert!((s.matrix() - &expected).norm() < 1e-14);
            let eig = hermitian_eigenvalues(s.matrix());
            assert!((eig[d - 1] - d as f64).abs() < 1e-9);
            assert!(eig[..d - 1].iter().all(|x| (x + 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn cs_matches_outer_product_form() {
        for m in 0..10u64 {
            let d = 4;
            let u = sample_global_haar(d, &mut RngStream::new(12, 0, m)).unwrap();
            let povm = RankOnePovm::new(u.clone()).unwrap();
            let k = (m as usize) % d;
            let mut counts = vec![0; d];
            counts[k] = 1;
            let rec = MeasurementRecord::new(povm, counts).unwrap();
            let mut p = CVector::zeros(d);
            p[k] = c(1.0, 0.0);
            let v = u.adjoint() * p;
            let expected = outer(&v) * c(d as f64 + 1.0, 0.0) - CMatrix::identity(d, d);
            let s = cs_shadow(&rec);
            assert!((s.matrix() - expected).camax() < 1e-12);
            assert!((s.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn estimate_identical_records_average_equals_shadow() {
        let povm = haar_povms(3, 1, 7).remove(0);
        let rec = MeasurementRecord::new(povm, vec![0, 1, 0]).unwrap();
        let recs = vec![rec; 5];
        for method in [ShadowMethod::Cs, ShadowMethod::ls(), ShadowMethod::rls()] {
            let set = estimate(&recs, method).unwrap();
            assert_eq!(set.shadows.len(), 5);
            assert!((set.average.matrix() - set.shadows[0].matrix()).norm() < 1e-10);
            assert_eq!(set.average.method(), method.tag());
        }
    }

    #[test]
    fn estimate_rejects_empty_and_bad_params() {
        assert!(matches!(
            estimate(&[], ShadowMethod::Cs),
            Err(Error::Empty(_))
        ));
        let povm = RankOnePovm::new(CMatrix::identity(2, 2)).unwrap();
        let rec = MeasurementRecord::new(povm, vec![1, 0]).unwrap();
        assert!(estimate(std::slice::from_ref(&rec), ShadowMethod::Rls { mu: -1.0 }).is_err());
        assert!(estimate(std::slice::from_ref(&rec), ShadowMethod::Ls { rcond: 2.0 }).is_err());
    }
}
