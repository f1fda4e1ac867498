use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{re, Real, C};
use crate::space::TensorSpace;
use crate::state::{heal_hermitian, DensityMatrix, HermitianObservable};
use crate::tolerance::{TAU_COMPLETE, TAU_RANK};

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel<T: Real> {
    input_space: TensorSpace,
    output_space: TensorSpace,
    kraus: Vec<CMat<T>>,
}

fn completeness_defect<T: Real>(kraus: &[CMat<T>], din: usize) -> T {
    let mut sum = CMat::<T>::zeros(din, din);
    for k in kraus {
        sum += k.adjoint() * k;
    }
    linalg::max_abs(&(sum - linalg::eye::<T>(din)))
}

/// Named single-qubit families plus the replacer channel.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedChannel<T: Real> {
    Depolarizing,
    Dephasing,
    Replacer(DensityMatrix<T>),
}

impl<T: Real> KrausChannel<T> {
    /// Checks shapes and `Σ K†K = Id`.
    pub fn new(input_space: TensorSpace, output_space: TensorSpace, kraus: Vec<CMat<T>>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::Incomplete(f64::INFINITY));
        }
        let (din, dout) = (input_space.total_dim(), output_space.total_dim());
        for k in &kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::DimensionMismatch { expected: dout * din, found: k.nrows() * k.ncols() });
            }
        }
        let defect = completeness_defect(&kraus, din);
        if defect > T::tol(TAU_COMPLETE) {
            return Err(Error::Incomplete(defect.as_f64()));
        }
        Ok(Self { input_space, output_space, kraus })
    }

    pub(crate) fn trusted(input_space: TensorSpace, output_space: TensorSpace, kraus: Vec<CMat<T>>) -> Self {
        Self { input_space, output_space, kraus }
    }

    pub fn identity(space: TensorSpace) -> Self {
        let d = space.total_dim();
        Self { input_space: space.clone(), output_space: space, kraus: vec![linalg::eye(d)] }
    }

    /// Conjugation by a unitary on `space`.
    pub fn from_unitary(space: TensorSpace, u: CMat<T>) -> Result<Self> {
        let d = space.total_dim();
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
        }
        Self::new(space.clone(), space, vec![u])
    }

    /// Depolarizing qubit channel with the four-operator Pauli decomposition,
    /// weights `√(1 − 3p/4)` and `√(p/4)`. Input `A`, output `B`.
    pub fn depolarizing(p: T) -> Result<Self> {
        check_probability(p)?;
        let a0 = (T::one() - T::lit(0.75) * p).sqrt();
        let ai = (p / T::lit(4.0)).sqrt();
        let [x, y, z] = linalg::paulis::<T>();
        let kraus = vec![linalg::eye::<T>(2) * re(a0), x * re(ai), y * re(ai), z * re(ai)];
        Self::new(qubit("A"), qubit("B"), kraus)
    }

    /// Dephasing qubit channel with Kraus `{√(1 − p/2) Id, √(p/2) σ₃}`.
    pub fn dephasing(p: T) -> Result<Self> {
        check_probability(p)?;
        let a0 = (T::one() - p / T::lit(2.0)).sqrt();
        let a3 = (p / T::lit(2.0)).sqrt();
        let z = linalg::paulis::<T>()[2].clone();
        Self::new(qubit("A"), qubit("B"), vec![linalg::eye::<T>(2) * re(a0), z * re(a3)])
    }

    /// Channel that outputs `fixed` for every input on `input_space`.
    pub fn replacer(input_space: TensorSpace, fixed: &DensityMatrix<T>) -> Result<Self> {
        let (vals, vecs) = linalg::eigh(fixed.data());
        let top = vals.iter().fold(T::zero(), |a, &b| a.max(b));
        let din = input_space.total_dim();
        let mut kraus = Vec::new();
        for (m, &lam) in vals.iter().enumerate() {
            if lam <= top * T::lit(TAU_RANK) {
                continue;
            }
            let col = vecs.column(m) * re(lam.sqrt());
            for i in 0..din {
                let mut k = CMat::zeros(fixed.dim(), din);
                k.set_column(i, &col);
                kraus.push(k);
            }
        }
        Self::new(input_space, fixed.space().clone(), kraus)
    }

    /// Dispatches on a [`NamedChannel`]; `p` is ignored for the replacer.
    pub fn named(kind: &NamedChannel<T>, p: T) -> Result<Self> {
        match kind {
            NamedChannel::Depolarizing => Self::depolarizing(p),
            NamedChannel::Dephasing => Self::dephasing(p),
            NamedChannel::Replacer(fixed) => {
                check_probability(p)?;
                Self::replacer(fixed.space().relabel(|l| format!("{l}_in"))?, fixed)
            }
        }
    }

    pub fn input_space(&self) -> &TensorSpace {
        &self.input_space
    }

    pub fn output_space(&self) -> &TensorSpace {
        &self.output_space
    }

    pub fn kraus_ops(&self) -> &[CMat<T>] {
        &self.kraus
    }

    pub fn num_kraus(&self) -> usize {
        self.kraus.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_space.total_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output_space.total_dim()
    }

    /// Same Kraus operators on relabeled spaces of identical shape.
    pub fn with_spaces(&self, input_space: TensorSpace, output_space: TensorSpace) -> Result<Self> {
        if !input_space.same_shape(&self.input_space) || !output_space.same_shape(&self.output_space) {
            return Err(Error::SpaceMismatch("relabeling must keep factor dims".into()));
        }
        Ok(Self { input_space, output_space, kraus: self.kraus.clone() })
    }

    pub(crate) fn apply_raw(&self, rho: &CMat<T>) -> CMat<T> {
        let mut out = CMat::zeros(self.output_dim(), self.output_dim());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    pub(crate) fn adjoint_raw(&self, x: &CMat<T>) -> CMat<T> {
        let mut out = CMat::zeros(self.input_dim(), self.input_dim());
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        out
    }

    /// `Γ_IJ = Tr(K_I ρ K_J†)`.
    pub(crate) fn complement_raw(&self, rho: &CMat<T>) -> CMat<T> {
        let n = self.kraus.len();
        let kr: Vec<CMat<T>> = self.kraus.iter().map(|k| k * rho).collect();
        let mut g = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = C::new(T::zero(), T::zero());
                let (a, b) = (&kr[i], &self.kraus[j]);
                for r in 0..a.nrows() {
                    for c in 0..a.ncols() {
                        acc += a[(r, c)] * b[(r, c)].conj();
                    }
                }
                g[(i, j)] = acc;
                g[(j, i)] = acc.conj();
            }
        }
        g
    }

    /// Adjoint of the complementary channel: `Σ_IJ X_JI K_J† K_I`.
    pub(crate) fn complement_adjoint_raw(&self, x: &CMat<T>) -> CMat<T> {
        let n = self.kraus.len();
        let din = self.input_dim();
        let mut out = CMat::zeros(din, din);
        for j in 0..n {
            let mut acc = CMat::zeros(self.output_dim(), din);
            for i in 0..n {
                acc += &self.kraus[i] * x[(j, i)];
            }
            out += self.kraus[j].adjoint() * acc;
        }
        out
    }

    fn check_input(&self, rho: &DensityMatrix<T>) -> Result<()> {
        if !rho.space().same_shape(&self.input_space) {
            return Err(Error::SpaceMismatch(format!(
                "state on {} but channel input is {}",
                rho.space(),
                self.input_space
            )));
        }
        Ok(())
    }

    /// `Σ K ρ K†`, re-symmetrized.
    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        self.check_input(rho)?;
        DensityMatrix::trusted(self.output_space.clone(), self.apply_raw(rho.data()))
    }

    /// Heisenberg-picture map `Σ K† X K`.
    pub fn adjoint_apply(&self, obs: &HermitianObservable<T>) -> Result<HermitianObservable<T>> {
        if !obs.space().same_shape(&self.output_space) {
            return Err(Error::SpaceMismatch(format!(
                "observable on {} but channel output is {}",
                obs.space(),
                self.output_space
            )));
        }
        HermitianObservable::new(self.input_space.clone(), self.adjoint_raw(obs.data()))
    }

    /// Output of the complementary channel on an environment space `E` whose
    /// dimension is the number of Kraus operators.
    pub fn complement(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        self.check_input(rho)?;
        let env = TensorSpace::single("E", self.kraus.len())?;
        DensityMatrix::trusted(env, heal_hermitian(self.complement_raw(rho.data()))?)
    }

    /// `after ∘ self`.
    pub fn then(&self, after: &Self) -> Result<Self> {
        if !after.input_space.same_shape(&self.output_space) {
            return Err(Error::SpaceMismatch("composition shapes differ".into()));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * after.kraus.len());
        for b in &after.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Ok(Self::trusted(self.input_space.clone(), after.output_space.clone(), kraus).compressed())
    }

    /// Parallel composition `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let input = self.input_space.concat(&other.input_space)?;
        let output = self.output_space.concat(&other.output_space)?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(linalg::kron(a, b));
            }
        }
        Ok(Self::trusted(input, output, kraus))
    }

    /// Unnormalized Choi matrix `Σ_ij |i⟩⟨j| ⊗ 𝒩(|i⟩⟨j|)` on input ⊗ output.
    pub fn choi(&self) -> CMat<T> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        let mut j = CMat::zeros(din * dout, din * dout);
        for k in &self.kraus {
            let v = CMat::from_fn(din * dout, 1, |idx, _| k[(idx % dout, idx / dout)]);
            j += &v * v.adjoint();
        }
        j
    }

    /// Equivalent channel with at most `d_in · d_out` Kraus operators, taken
    /// from the eigendecomposition of the Choi matrix.
    pub fn compressed(&self) -> Self {
        let (din, dout) = (self.input_dim(), self.output_dim());
        if self.kraus.len() <= 1 {
            return self.clone();
        }
        let (vals, vecs) = linalg::eigh(&self.choi());
        let top = vals.iter().fold(T::zero(), |a, &b| a.max(b));
        let mut kraus = Vec::new();
        for m in (0..vals.len()).rev() {
            let mu = vals[m];
            if mu <= top * T::lit(TAU_RANK) {
                continue;
            }
            let s = re(mu.sqrt());
            kraus.push(CMat::from_fn(dout, din, |b, a| vecs[(a * dout + b, m)] * s));
        }
        Self::trusted(self.input_space.clone(), self.output_space.clone(), kraus)
    }

    /// Largest deviation of `Σ K†K` from the identity.
    pub fn completeness_error(&self) -> T {
        completeness_defect(&self.kraus, self.input_dim())
    }

    pub fn cast<S: Real>(&self) -> KrausChannel<S> {
        KrausChannel {
            input_space: self.input_space.clone(),
            output_space: self.output_space.clone(),
            kraus: self.kraus.iter().map(linalg::cast).collect(),
        }
    }
}

fn qubit(label: &str) -> TensorSpace {
    TensorSpace::single(label, 2).expect("single label")
}

fn check_probability<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::OutOfRange(format!("p = {p} not in [0, 1]")));
    }
    Ok(())
}

/// Channel `A → B` obtained by evolving `ρ_env ⊗ ρ_A` with `u` and tracing out
/// everything outside `b_labels`.
///
/// Kraus operators are `K_(l,m) = √λ_m ⟨l|_B̄ U |e_m⟩_Ā`, ordered
/// lexicographically in `(l, m)`; environment eigenvalues below the rank
/// cutoff are dropped.
pub fn channel_from_unitary<T: Real>(
    u: &CMat<T>,
    space: &TensorSpace,
    rho_env: &DensityMatrix<T>,
    a_labels: &[&str],
    b_labels: &[&str],
) -> Result<KrausChannel<T>> {
    let d = space.total_dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
    }
    let env_labels = rho_env.space().labels();
    let env_pos = space.positions(&env_labels)?;
    let a_pos = space.positions(a_labels)?;
    if env_pos.iter().any(|p| a_pos.contains(p)) || env_pos.len() + a_pos.len() != space.len() {
        return Err(Error::BadPartition);
    }
    for (p, f) in env_pos.iter().zip(rho_env.space().factors()) {
        if space.factors()[*p].dim != f.dim {
            return Err(Error::SpaceMismatch(format!("environment factor `{}`", f.label)));
        }
    }
    let b_pos = space.positions(b_labels)?;
    let bbar_pos = space.complement_positions(&b_pos);
    let dims = space.dims();
    let col_perm: Vec<usize> = env_pos.iter().chain(a_pos.iter()).copied().collect();
    let row_perm: Vec<usize> = bbar_pos.iter().chain(b_pos.iter()).copied().collect();
    let ut = linalg::permute_cols(&linalg::permute_rows(u, &dims, &row_perm), &dims, &col_perm);

    let da: usize = a_pos.iter().map(|&p| dims[p]).product();
    let db: usize = b_pos.iter().map(|&p| dims[p]).product();
    let dbbar = d / db;
    let (vals, vecs) = linalg::eigh(rho_env.data());
    let top = vals.iter().fold(T::zero(), |a, &b| a.max(b));
    let kept: Vec<usize> = (0..vals.len()).filter(|&m| vals[m] > top * T::lit(TAU_RANK)).collect();
    let denv = rho_env.dim();
    let mut e = CMat::zeros(denv, kept.len());
    for (c, &m) in kept.iter().enumerate() {
        let s = re(vals[m].sqrt());
        for r in 0..denv {
            e[(r, c)] = vecs[(r, m)] * s;
        }
    }
    let w = ut * linalg::kron(&e, &linalg::eye::<T>(da));
    let mut kraus = Vec::with_capacity(dbbar * kept.len());
    for l in 0..dbbar {
        for m in 0..kept.len() {
            kraus.push(w.view((l * db, m * da), (db, da)).into_owned());
        }
    }
    KrausChannel::new(space.select(&a_pos), space.select(&b_pos), kraus)
}

/// Matrix as rows of interleaved `re, im` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<f64>>);

impl MatrixSpec {
    pub fn to_matrix<T: Real>(&self) -> Result<CMat<T>> {
        let rows = self.0.len();
        let width = self.0.first().map_or(0, |r| r.len());
        if rows == 0 || !width.is_multiple_of(2) || self.0.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidSpec("matrix rows must be equal-length re/im pairs".into()));
        }
        let cols = width / 2;
        Ok(CMat::from_fn(rows, cols, |i, j| C::new(T::lit(self.0[i][2 * j]), T::lit(self.0[i][2 * j + 1]))))
    }

    pub fn from_matrix<T: Real>(m: &CMat<T>) -> Self {
        Self(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).flat_map(|j| [m[(i, j)].re.as_f64(), m[(i, j)].im.as_f64()]).collect())
                .collect(),
        )
    }
}

/// Serializable channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelSpec {
    Identity { dim: usize },
    Depolarizing { p: f64 },
    Dephasing { p: f64 },
    Replacer { state: MatrixSpec, input_dim: Option<usize> },
    Kraus { ops: Vec<MatrixSpec> },
}

impl ChannelSpec {
    /// Builds a channel from a single-factor input space to a single-factor
    /// output space with the given labels.
    pub fn build<T: Real>(&self, input_label: &str, output_label: &str) -> Result<KrausChannel<T>> {
        let ch = match self {
            Self::Identity { dim } => KrausChannel::identity(TensorSpace::single(input_label, *dim)?),
            Self::Depolarizing { p } => KrausChannel::depolarizing(T::lit(*p))?,
            Self::Dephasing { p } => KrausChannel::dephasing(T::lit(*p))?,
            Self::Replacer { state, input_dim } => {
                let m = state.to_matrix::<T>()?;
                let out = TensorSpace::single(output_label, m.nrows())?;
                let fixed = DensityMatrix::new(out, m)?;
                let din = input_dim.unwrap_or(fixed.dim());
                KrausChannel::replacer(TensorSpace::single(input_label, din)?, &fixed)?
            }
            Self::Kraus { ops } => {
                let ks: Vec<CMat<T>> = ops.iter().map(|o| o.to_matrix()).collect::<Result<_>>()?;
                let first = ks.first().ok_or_else(|| Error::InvalidSpec("empty Kraus list".into()))?;
                let input = TensorSpace::single(input_label, first.ncols())?;
                let output = TensorSpace::single(output_label, first.nrows())?;
                KrausChannel::new(input, output, ks)?
            }
        };
        let input = TensorSpace::single(input_label, ch.input_dim())?;
        let output = TensorSpace::single(output_label, ch.output_dim())?;
        ch.with_spaces(input, output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depolarizing_limits() {
        let rho = crate::state::random_density_matrix::<f64>(qubit("A"), 3, 2).unwrap();
        let full = KrausChannel::depolarizing(1.0).unwrap().apply(&rho).unwrap();
        assert!(linalg::max_abs(&(full.data() - linalg::eye::<f64>(2) * re(0.5))) < 1e-14);
        let none = KrausChannel::depolarizing(0.0).unwrap().apply(&rho).unwrap();
        assert!(linalg::max_abs(&(none.data() - rho.data())) < 1e-14);
        assert!(KrausChannel::<f64>::depolarizing(1.5).is_err());
    }

    #[test]
    fn compression_preserves_action() {
        let ch = KrausChannel::<f64>::depolarizing(0.3).unwrap();
        let twice = ch.then(&ch.with_spaces(qubit("B"), qubit("C")).unwrap()).unwrap();
        assert!(twice.num_kraus() <= 4);
        let rho = crate::state::random_density_matrix::<f64>(qubit("A"), 5, 2).unwrap();
        let direct = ch.apply_raw(&ch.apply_raw(rho.data()));
        assert!(linalg::max_abs(&(twice.apply_raw(rho.data()) - direct)) < 1e-13);
    }

    #[test]
    fn spec_round_trip() {
        let spec: ChannelSpec = serde_json::from_str(r#"{"kind":"dephasing","p":0.25}"#).unwrap();
        let ch = spec.build::<f64>("A", "B").unwrap();
        assert_eq!(ch.num_kraus(), 2);
        let k = ChannelSpec::Kraus { ops: ch.kraus_ops().iter().map(MatrixSpec::from_matrix).collect() };
        let back = k.build::<f64>("A", "B").unwrap();
        assert_eq!(back.kraus_ops(), ch.kraus_ops());
    }
}
