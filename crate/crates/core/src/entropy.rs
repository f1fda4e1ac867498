use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{re, Real, C};
use crate::state::{heal_hermitian, DensityMatrix};
use crate::tolerance::{TAU_PSD, TAU_RANK, TAU_SUPPORT};

/// Extended nonnegative real: either finite or `+∞` from a support violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyValue<T: Real> {
    Finite(T),
    Infinite,
}

impl<T: Real> EntropyValue<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    /// True exactly when the value is `+∞`.
    pub fn support_violation(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    pub fn finite(&self) -> Option<T> {
        match self {
            Self::Finite(x) => Some(*x),
            Self::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Finite(x) => x.as_f64(),
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl<T: Real> PartialOrd for EntropyValue<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Self::Infinite, Self::Infinite) => Some(Ordering::Equal),
            (Self::Infinite, _) => Some(Ordering::Greater),
            (_, Self::Infinite) => Some(Ordering::Less),
            (Self::Finite(a), Self::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl<T: Real> fmt::Display for EntropyValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(x) => write!(f, "{x}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl<T: Real> Serialize for EntropyValue<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(x) => s.serialize_f64(x.as_f64()),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Logarithm on the support and the support projector of a PSD matrix.
pub(crate) fn log_support_raw<T: Real>(h: &CMat<T>) -> (CMat<T>, CMat<T>) {
    let (vals, vecs) = linalg::eigh(h);
    let top = vals.iter().fold(T::zero(), |a, &b| a.max(b));
    let cut = top * T::lit(TAU_RANK);
    let zero = re(T::zero());
    let logs: Vec<C<T>> = vals.iter().map(|&x| if x > cut { re(x.ln()) } else { zero }).collect();
    let proj: Vec<C<T>> = vals.iter().map(|&x| if x > cut { re(T::one()) } else { zero }).collect();
    (linalg::from_spectrum(&vecs, &logs), linalg::from_spectrum(&vecs, &proj))
}

/// Logarithm on the support with a fixed value on the null space.
pub(crate) fn log_clamped_raw<T: Real>(h: &CMat<T>, null_value: T) -> CMat<T> {
    let (vals, vecs) = linalg::eigh(h);
    let top = vals.iter().fold(T::zero(), |a, &b| a.max(b));
    let cut = top * T::lit(TAU_RANK);
    let logs: Vec<C<T>> = vals
        .iter()
        .map(|&x| re(if x > cut { x.ln().max(null_value) } else { null_value }))
        .collect();
    linalg::from_spectrum(&vecs, &logs)
}

/// `−Σ λ log λ` over eigenvalues above the rank cutoff.
pub(crate) fn entropy_raw<T: Real>(h: &CMat<T>) -> T {
    entropy_of_spectrum(linalg::eigvalsh(h).iter().copied())
}

pub(crate) fn entropy_of_spectrum<T: Real>(vals: impl Iterator<Item = T> + Clone) -> T {
    let top = vals.clone().fold(T::zero(), |a, b| a.max(b));
    let cut = top * T::lit(TAU_RANK);
    vals.filter(|&x| x > cut).fold(T::zero(), |acc, x| acc - x * x.ln())
}

/// Leaked mass `Tr ρ (Id − Π_σ)` and `Tr ρ log σ` on σ's support.
pub(crate) fn cross_term_raw<T: Real>(rho: &CMat<T>, sigma: &CMat<T>) -> (T, T) {
    let (log_s, proj) = log_support_raw(sigma);
    let kept = linalg::trace_product(rho, &proj).re;
    let leak = linalg::trace_re(rho) - kept;
    (leak, linalg::trace_product(rho, &log_s).re)
}

pub(crate) fn relative_entropy_raw<T: Real>(rho: &CMat<T>, sigma: &CMat<T>) -> EntropyValue<T> {
    let (leak, cross) = cross_term_raw(rho, sigma);
    if leak > T::tol(TAU_SUPPORT) {
        return EntropyValue::Infinite;
    }
    let v = -entropy_raw(rho) - cross;
    EntropyValue::Finite(v.max(T::zero()))
}

/// Logarithm on the support and support projector of a Hermitian PSD matrix.
///
/// Eigenvalues at or below `1e-12 · λmax` are treated as zero.
pub fn matrix_log_support<T: Real>(h: &CMat<T>) -> Result<(CMat<T>, CMat<T>)> {
    let h = heal_hermitian(h.clone())?;
    let min = linalg::eigvalsh(&h).iter().copied().next().unwrap_or(T::zero());
    if min < -T::tol(TAU_PSD) {
        return Err(Error::NotPositive(min.as_f64()));
    }
    Ok(log_support_raw(&h))
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> T {
    entropy_raw(rho.data())
}

/// Quantum relative entropy `S(ρ|σ) = Tr ρ log ρ − Tr ρ log σ`.
pub fn relative_entropy<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<EntropyValue<T>> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    Ok(relative_entropy_raw(rho.data(), sigma.data()))
}

fn check_disjoint(parts: &[&[&str]]) -> Result<HashSet<String>> {
    let mut seen = HashSet::new();
    for part in parts {
        for l in part.iter() {
            if !seen.insert(l.to_string()) {
                return Err(Error::BadPartition);
            }
        }
    }
    Ok(seen)
}

/// `I(1:2) = S₁ + S₂ − S₁₂` for a bipartition covering every label.
pub fn mutual_information<T: Real>(rho: &DensityMatrix<T>, part1: &[&str], part2: &[&str]) -> Result<T> {
    let seen = check_disjoint(&[part1, part2])?;
    if seen.len() != rho.space().len() {
        return Err(Error::BadPartition);
    }
    let s1 = von_neumann_entropy(&rho.partial_trace(part1)?);
    let s2 = von_neumann_entropy(&rho.partial_trace(part2)?);
    Ok(s1 + s2 - von_neumann_entropy(rho))
}

/// `I(A:C|B) = S_AB + S_BC − S_B − S_ABC` over disjoint label sets.
pub fn conditional_mutual_information<T: Real>(
    rho: &DensityMatrix<T>,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<T> {
    check_disjoint(&[a, b, c])?;
    let join = |x: &[&str], y: &[&str]| -> Vec<String> {
        x.iter().chain(y.iter()).map(|s| s.to_string()).collect()
    };
    let ab = join(a, b);
    let bc = join(b, c);
    let abc: Vec<String> = join(a, b).into_iter().chain(c.iter().map(|s| s.to_string())).collect();
    let s_ab = von_neumann_entropy(&rho.partial_trace(&ab)?);
    let s_bc = von_neumann_entropy(&rho.partial_trace(&bc)?);
    let s_abc = von_neumann_entropy(&rho.partial_trace(&abc)?);
    let s_b = if b.is_empty() { T::zero() } else { von_neumann_entropy(&rho.partial_trace(b)?) };
    Ok(s_ab + s_bc - s_b - s_abc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::TensorSpace;

    fn qubit() -> TensorSpace {
        TensorSpace::single("A", 2).unwrap()
    }

    #[test]
    fn log_of_rank_one() {
        let p = DensityMatrix::<f64>::basis(qubit(), 0).unwrap();
        let (l, proj) = matrix_log_support(p.data()).unwrap();
        assert!(linalg::max_abs(&l) < 1e-14);
        assert!((proj[(0, 0)].re - 1.0).abs() < 1e-14 && proj[(1, 1)].re.abs() < 1e-14);
    }

    #[test]
    fn log_of_diagonal() {
        let d = DensityMatrix::<f64>::diagonal(qubit(), &[0.9, 0.1]).unwrap();
        let (l, _) = matrix_log_support(d.data()).unwrap();
        assert!((l[(0, 0)].re - 0.9f64.ln()).abs() < 1e-14);
        assert!((l[(1, 1)].re - 0.1f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        let d = DensityMatrix::<f64>::diagonal(qubit(), &[0.75, 0.25]).unwrap();
        let want = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((von_neumann_entropy(&d) - want).abs() < 1e-14);
        let m = DensityMatrix::<f64>::maximally_mixed(qubit());
        assert!((von_neumann_entropy(&m) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let zero = DensityMatrix::<f64>::basis(qubit(), 0).unwrap();
        let one = DensityMatrix::<f64>::basis(qubit(), 1).unwrap();
        let mixed = DensityMatrix::<f64>::maximally_mixed(qubit());
        let v = relative_entropy(&zero, &mixed).unwrap().finite().unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-14);
        assert!(relative_entropy(&one, &zero).unwrap().support_violation());
        assert_eq!(relative_entropy(&mixed, &mixed).unwrap().finite().unwrap(), 0.0);
    }

    #[test]
    fn ordering_puts_infinity_on_top() {
        assert!(EntropyValue::<f64>::Infinite > EntropyValue::Finite(1e300));
    }
}
