use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled subsystems.
///
/// The composite index is row-major with the leftmost factor most significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorSpace {
    factors: Vec<Factor>,
}

impl TensorSpace {
    pub fn new<S: AsRef<str>>(factors: &[(S, usize)]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(factors.len());
        for (label, dim) in factors {
            let label = label.as_ref().to_string();
            if *dim == 0 {
                return Err(Error::ZeroDimension(label));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::DuplicateLabel(label));
            }
            out.push(Factor { label, dim: *dim });
        }
        Ok(Self { factors: out })
    }

    /// A single factor.
    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new(&[(label, dim)])
    }

    /// `n` qubits labeled `prefix0, prefix1, ...`.
    pub fn qubits(prefix: &str, n: usize) -> Self {
        let f: Vec<(String, usize)> = (0..n).map(|i| (format!("{prefix}{i}"), 2)).collect();
        Self::new(&f).expect("generated labels are unique")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            if !seen.insert(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            out.push(self.position(l)?);
        }
        Ok(out)
    }

    /// Factors at the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            factors: positions.iter().map(|&p| self.factors[p].clone()).collect(),
        }
    }

    /// Subspace spanned by the named factors, in the order given.
    pub fn subspace<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        Ok(self.select(&self.positions(labels)?))
    }

    /// Positions not listed in `positions`, in original order.
    pub fn complement_positions(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|k| !positions.contains(k)).collect()
    }

    /// Concatenation; labels must stay unique.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut all: Vec<(String, usize)> =
            self.factors.iter().map(|f| (f.label.clone(), f.dim)).collect();
        all.extend(other.factors.iter().map(|f| (f.label.clone(), f.dim)));
        Self::new(&all)
    }

    /// Same dims with every label passed through `f`.
    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        let all: Vec<(String, usize)> = self.factors.iter().map(|x| (f(&x.label), x.dim)).collect();
        Self::new(&all)
    }

    /// Same dims, same order.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims() == other.dims()
    }
}

impl fmt::Display for TensorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", x.label, x.dim)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_zero_dims() {
        assert_eq!(
            TensorSpace::new(&[("A", 2), ("A", 3)]),
            Err(Error::DuplicateLabel("A".into()))
        );
        assert!(TensorSpace::new(&[("A", 0)]).is_err());
    }

    #[test]
    fn bookkeeping() {
        let s = TensorSpace::new(&[("A", 2), ("B", 3)]).unwrap();
        assert_eq!(s.total_dim(), 6);
        assert_eq!(s.position("B").unwrap(), 1);
        assert_eq!(s.subspace(&["B"]).unwrap().dims(), vec![3]);
        assert!(s.concat(&TensorSpace::single("A", 2).unwrap()).is_err());
    }
}
