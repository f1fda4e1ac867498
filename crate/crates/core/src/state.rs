use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{re, Real, C};
use crate::space::TensorSpace;
use crate::tolerance::{HEAL_LIMIT, TAU_PSD, TAU_TRACE};

/// Symmetrizes `m`, failing if the correction is larger than the heal limit.
pub(crate) fn heal_hermitian<T: Real>(m: CMat<T>) -> Result<CMat<T>> {
    let defect = linalg::hermiticity_defect(&m);
    let scale = T::one().max(linalg::max_abs(&m));
    if defect > T::tol(HEAL_LIMIT) * scale {
        return Err(Error::NotHermitian(defect.as_f64()));
    }
    Ok(linalg::hermitian_part(&m))
}

fn check_square<T: Real>(space: &TensorSpace, data: &CMat<T>) -> Result<()> {
    let d = space.total_dim();
    if data.nrows() != d || data.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: data.nrows().max(data.ncols()),
        });
    }
    Ok(())
}

/// Positive semidefinite, unit-trace operator on a labeled tensor space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    space: TensorSpace,
    data: CMat<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity, positivity and normalization.
    pub fn new(space: TensorSpace, data: CMat<T>) -> Result<Self> {
        check_square(&space, &data)?;
        let data = heal_hermitian(data)?;
        let tr = linalg::trace_re(&data);
        if (tr - T::one()).abs() > T::tol(TAU_TRACE) {
            return Err(Error::BadTrace(tr.as_f64()));
        }
        let min = linalg::eigvalsh(&data).iter().copied().next().unwrap_or(T::zero());
        if min < -T::tol(TAU_PSD) {
            return Err(Error::NotPositive(min.as_f64()));
        }
        Ok(Self { space, data })
    }

    /// Wraps data already known to be a state, only healing Hermiticity.
    pub(crate) fn trusted(space: TensorSpace, data: CMat<T>) -> Result<Self> {
        check_square(&space, &data)?;
        Ok(Self { space, data: heal_hermitian(data)? })
    }

    /// Normalized projector onto `psi`.
    pub fn pure(space: TensorSpace, psi: &[C<T>]) -> Result<Self> {
        let d = space.total_dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: psi.len() });
        }
        let v = CMat::from_column_slice(d, 1, psi);
        let n = linalg::frobenius(&v);
        if n <= T::zero() {
            return Err(Error::BadTrace(0.0));
        }
        let v = v / re(n);
        Self::trusted(space, &v * v.adjoint())
    }

    /// Computational basis projector `|i⟩⟨i|`.
    pub fn basis(space: TensorSpace, index: usize) -> Result<Self> {
        let d = space.total_dim();
        if index >= d {
            return Err(Error::OutOfRange(format!("basis index {index} >= {d}")));
        }
        let mut m = CMat::zeros(d, d);
        m[(index, index)] = re(T::one());
        Ok(Self { space, data: m })
    }

    /// `Id / d`.
    pub fn maximally_mixed(space: TensorSpace) -> Self {
        let d = space.total_dim();
        let data = linalg::eye::<T>(d) / re(T::lit(d as f64));
        Self { space, data }
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(space: TensorSpace, probs: &[T]) -> Result<Self> {
        let d = space.total_dim();
        if probs.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: probs.len() });
        }
        let mut m = CMat::zeros(d, d);
        for (i, p) in probs.iter().enumerate() {
            m[(i, i)] = re(*p);
        }
        Self::new(space, m)
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn data(&self) -> &CMat<T> {
        &self.data
    }

    pub fn into_data(self) -> CMat<T> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<T> {
        linalg::eigvalsh(&self.data).iter().copied().collect()
    }

    /// Kronecker product; factor lists are concatenated.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        Ok(Self { space, data: linalg::kron(&self.data, &other.data) })
    }

    /// Partial trace onto the listed labels, kept in the order they appear in
    /// this state's space.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut pos = self.space.positions(keep)?;
        pos.sort_unstable();
        let data = linalg::partial_trace(&self.data, &self.space.dims(), &pos);
        Ok(Self { space: self.space.select(&pos), data })
    }

    /// Reorders factors to the given label order (a permutation of all labels).
    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let pos = self.space.positions(order)?;
        if pos.len() != self.space.len() {
            return Err(Error::BadPartition);
        }
        let data = linalg::permute_op(&self.data, &self.space.dims(), &pos);
        Ok(Self { space: self.space.select(&pos), data })
    }

    /// Same data on a relabeled space of identical shape.
    pub fn with_space(&self, space: TensorSpace) -> Result<Self> {
        if !space.same_shape(&self.space) {
            return Err(Error::SpaceMismatch(format!("{} vs {}", space, self.space)));
        }
        Ok(Self { space, data: self.data.clone() })
    }

    /// `U ρ U†` for a unitary on the full space.
    pub fn conjugate(&self, u: &CMat<T>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        Self::trusted(self.space.clone(), u * &self.data * u.adjoint())
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(linalg::trace_distance(&self.data, &other.data))
    }

    /// `Tr ρ O`.
    pub fn expectation(&self, o: &HermitianObservable<T>) -> Result<T> {
        if o.data.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: o.data.nrows() });
        }
        Ok(linalg::trace_product(&self.data, &o.data).re)
    }

    /// Converts to another scalar type.
    pub fn cast<S: Real>(&self) -> DensityMatrix<S> {
        DensityMatrix { space: self.space.clone(), data: linalg::cast(&self.data) }
    }
}

/// Hermitian operator on a labeled tensor space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable<T: Real> {
    space: TensorSpace,
    data: CMat<T>,
}

impl<T: Real> HermitianObservable<T> {
    pub fn new(space: TensorSpace, data: CMat<T>) -> Result<Self> {
        check_square(&space, &data)?;
        Ok(Self { space, data: heal_hermitian(data)? })
    }

    pub fn identity(space: TensorSpace) -> Self {
        let d = space.total_dim();
        Self { space, data: linalg::eye(d) }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn data(&self) -> &CMat<T> {
        &self.data
    }

    pub fn into_data(self) -> CMat<T> {
        self.data
    }

    /// Largest absolute eigenvalue.
    pub fn op_norm(&self) -> T {
        linalg::op_norm_hermitian(&self.data)
    }
}

/// `G G† / Tr(G G†)` with `G` a seeded complex Gaussian `dim × rank` matrix.
pub fn random_density_matrix<T: Real>(space: TensorSpace, seed: u64, rank: usize) -> Result<DensityMatrix<T>> {
    let d = space.total_dim();
    if rank == 0 || rank > d {
        return Err(Error::OutOfRange(format!("rank {rank} not in 1..={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = linalg::random_gaussian::<T, _>(d, rank, &mut rng);
    let m = &g * g.adjoint();
    let tr = linalg::trace_re(&m);
    DensityMatrix::trusted(space, m / re(tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    #[test]
    fn tensor_of_product_states() {
        let a = DensityMatrix::<f64>::basis(TensorSpace::single("A", 2).unwrap(), 0).unwrap();
        let b = DensityMatrix::<f64>::basis(TensorSpace::single("B", 2).unwrap(), 1).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.data()[(1, 1)], cplx(1.0, 0.0));
        assert_eq!(ab.space().labels(), vec!["A", "B"]);
    }

    #[test]
    fn rejects_bad_trace_and_negative() {
        let s = TensorSpace::single("A", 2).unwrap();
        assert!(matches!(DensityMatrix::<f64>::diagonal(s.clone(), &[0.5, 0.6]), Err(Error::BadTrace(_))));
        assert!(matches!(DensityMatrix::<f64>::diagonal(s, &[1.5, -0.5]), Err(Error::NotPositive(_))));
    }

    #[test]
    fn heals_small_asymmetry_only() {
        let s = TensorSpace::single("A", 2).unwrap();
        let mut m = CMat::<f64>::identity(2, 2) * cplx(0.5, 0.0);
        m[(0, 1)] = cplx(1e-10, 0.0);
        assert!(DensityMatrix::new(s.clone(), m.clone()).is_ok());
        m[(0, 1)] = cplx(1e-3, 0.0);
        assert!(matches!(DensityMatrix::new(s, m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn random_states_are_deterministic() {
        let s = TensorSpace::qubits("q", 2);
        let a = random_density_matrix::<f64>(s.clone(), 7, 4).unwrap();
        let b = random_density_matrix::<f64>(s.clone(), 7, 4).unwrap();
        assert_eq!(a, b);
        let p = random_density_matrix::<f64>(s, 7, 1).unwrap();
        let ev = p.eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
    }
}
