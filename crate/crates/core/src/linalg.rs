//! Dense complex linear algebra on tensor-factored spaces.
//!
//! Composite indices are row-major with the leftmost factor most significant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{re, Real, C};

/// Dense complex matrix.
pub type CMat<T> = DMatrix<C<T>>;

/// Identity matrix of size `n`.
pub fn eye<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh<T: Real>(h: &CMat<T>) -> (DVector<T>, CMat<T>) {
    let n = h.nrows();
    if n == 0 {
        return (DVector::zeros(0), CMat::zeros(0, 0));
    }
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh<T: Real>(h: &CMat<T>) -> DVector<T> {
    let mut v: Vec<T> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    DVector::from_vec(v)
}

/// Rebuilds `V diag(f) V†` from eigenvectors and complex weights.
pub fn from_spectrum<T: Real>(vecs: &CMat<T>, weights: &[C<T>]) -> CMat<T> {
    let mut scaled = vecs.clone();
    for (k, w) in weights.iter().enumerate() {
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= *w;
        }
    }
    scaled * vecs.adjoint()
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn map_hermitian<T: Real>(h: &CMat<T>, f: impl Fn(T) -> T) -> CMat<T> {
    let (vals, vecs) = eigh(h);
    let w: Vec<C<T>> = vals.iter().map(|&x| re(f(x))).collect();
    from_spectrum(&vecs, &w)
}

/// `exp(i t H)` for Hermitian `H`.
pub fn expm_i_hermitian<T: Real>(h: &CMat<T>, t: T) -> CMat<T> {
    let (vals, vecs) = eigh(h);
    let w: Vec<C<T>> = vals
        .iter()
        .map(|&x| {
            let ph = x * t;
            C::new(ph.cos(), ph.sin())
        })
        .collect();
    from_spectrum(&vecs, &w)
}

/// `(M + M†) / 2`.
pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * re(T::lit(0.5))
}

/// Largest entry modulus of `M − M†`.
pub fn hermiticity_defect<T: Real>(m: &CMat<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Largest entry modulus.
pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter()
        .map(|z| z.norm_sqr().sqrt())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Frobenius norm.
pub fn frobenius<T: Real>(m: &CMat<T>) -> T {
    m.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt()
}

/// Trace.
pub fn trace<T: Real>(m: &CMat<T>) -> C<T> {
    m.diagonal().iter().fold(C::new(T::zero(), T::zero()), |a, b| a + b)
}

/// Real part of the trace.
pub fn trace_re<T: Real>(m: &CMat<T>) -> T {
    trace(m).re
}

/// `Tr(A B)` without forming the product.
pub fn trace_product<T: Real>(a: &CMat<T>, b: &CMat<T>) -> C<T> {
    let mut acc = C::new(T::zero(), T::zero());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Kronecker product.
pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn op_norm_hermitian<T: Real>(h: &CMat<T>) -> T {
    eigvalsh(h)
        .iter()
        .map(|x| x.abs())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian<T: Real>(h: &CMat<T>) -> T {
    eigvalsh(h).iter().map(|x| x.abs()).fold(T::zero(), |a, b| a + b)
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    trace_norm_hermitian(&hermitian_part(&(a - b))) * T::lit(0.5)
}

/// Square root of a PSD matrix, clamping negative eigenvalues to zero.
pub fn sqrt_psd<T: Real>(h: &CMat<T>) -> CMat<T> {
    map_hermitian(h, |x| if x > T::zero() { x.sqrt() } else { T::zero() })
}

/// Inverse square root on the support (eigenvalues above `rel_cut · λmax`).
pub fn inv_sqrt_support<T: Real>(h: &CMat<T>, rel_cut: T) -> CMat<T> {
    let (vals, vecs) = eigh(h);
    let top = vals.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });
    let cut = top * rel_cut;
    let w: Vec<C<T>> = vals
        .iter()
        .map(|&x| if x > cut && x > T::zero() { re(T::one() / x.sqrt()) } else { re(T::zero()) })
        .collect();
    from_spectrum(&vecs, &w)
}

/// Complex matrix with i.i.d. standard complex Gaussian entries.
pub fn random_gaussian<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat<T> {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            m[(i, j)] = C::new(T::lit(a), T::lit(b));
        }
    }
    m
}

/// Haar-like random isometry from a QR decomposition with phase fixing.
pub fn random_isometry<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat<T> {
    assert!(cols <= rows, "isometry needs cols <= rows");
    let g = random_gaussian::<T, R>(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        let d = r[(k, k)];
        let m = d.norm_sqr().sqrt();
        if m > T::zero() {
            let ph = d / re(m);
            for i in 0..rows {
                q[(i, k)] *= ph;
            }
        }
    }
    q.columns(0, cols).into_owned()
}

/// Random unitary of size `n`.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat<T> {
    random_isometry(n, n, rng)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat<T> {
    hermitian_part(&random_gaussian(n, n, rng))
}

/// Nearest isometry via the polar decomposition `V (V†V)^{-1/2}`.
pub fn polar_isometry<T: Real>(v: &CMat<T>) -> CMat<T> {
    let g = v.adjoint() * v;
    let inv = map_hermitian(&g, |x| T::one() / x.sqrt());
    v * inv
}

/// Row-major strides for the given dims.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For a reordering where new factor `k` is old factor `perm[k]`, returns the
/// old composite index for every new composite index.
pub fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total: usize = dims.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; perm.len()];
    for _ in 0..total {
        let old: usize = digits.iter().zip(perm).map(|(&d, &p)| d * old_strides[p]).sum();
        map.push(old);
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < new_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    map
}

/// Reorders the tensor factors of a square operator.
pub fn permute_op<T: Real>(m: &CMat<T>, dims: &[usize], perm: &[usize]) -> CMat<T> {
    let map = permutation_map(dims, perm);
    let n = map.len();
    CMat::from_fn(n, n, |i, j| m[(map[i], map[j])])
}

/// Reorders the tensor factors of the row space only.
pub fn permute_rows<T: Real>(m: &CMat<T>, dims: &[usize], perm: &[usize]) -> CMat<T> {
    let map = permutation_map(dims, perm);
    CMat::from_fn(map.len(), m.ncols(), |i, j| m[(map[i], j)])
}

/// Reorders the tensor factors of the column space only.
pub fn permute_cols<T: Real>(m: &CMat<T>, dims: &[usize], perm: &[usize]) -> CMat<T> {
    let map = permutation_map(dims, perm);
    CMat::from_fn(m.nrows(), map.len(), |i, j| m[(i, map[j])])
}

/// Partial trace keeping factors `keep` (in the given order).
pub fn partial_trace<T: Real>(m: &CMat<T>, dims: &[usize], keep: &[usize]) -> CMat<T> {
    let mut perm: Vec<usize> = keep.to_vec();
    perm.extend((0..dims.len()).filter(|k| !keep.contains(k)));
    let dk: usize = keep.iter().map(|&k| dims[k]).product();
    let dr: usize = dims.iter().product::<usize>() / dk.max(1);
    let map = permutation_map(dims, &perm);
    let mut out = CMat::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C::new(T::zero(), T::zero());
            for r in 0..dr {
                acc += m[(map[a * dr + r], map[b * dr + r])];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Trace over the trailing factor of dimension `d2` in a bipartition `d1 × d2`.
pub fn trace_right<T: Real>(m: &CMat<T>, d1: usize, d2: usize) -> CMat<T> {
    CMat::from_fn(d1, d1, |a, b| {
        let mut acc = C::new(T::zero(), T::zero());
        for r in 0..d2 {
            acc += m[(a * d2 + r, b * d2 + r)];
        }
        acc
    })
}

/// Trace over the leading factor of dimension `d1` in a bipartition `d1 × d2`.
pub fn trace_left<T: Real>(m: &CMat<T>, d1: usize, d2: usize) -> CMat<T> {
    CMat::from_fn(d2, d2, |a, b| {
        let mut acc = C::new(T::zero(), T::zero());
        for l in 0..d1 {
            acc += m[(l * d2 + a, l * d2 + b)];
        }
        acc
    })
}

/// Embeds an operator acting on factors `targets` into the full space.
pub fn embed<T: Real>(op: &CMat<T>, dims: &[usize], targets: &[usize]) -> CMat<T> {
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();
    let dr: usize = rest.iter().map(|&k| dims[k]).product();
    let big = kron(op, &eye(dr));
    let mut perm: Vec<usize> = targets.to_vec();
    perm.extend(rest.iter().copied());
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    permute_op(&big, &new_dims, &inv)
}

/// Pauli matrices `σ₁, σ₂, σ₃`.
pub fn paulis<T: Real>() -> [CMat<T>; 3] {
    let z = T::zero();
    let o = T::one();
    let sx = CMat::from_row_slice(2, 2, &[C::new(z, z), C::new(o, z), C::new(o, z), C::new(z, z)]);
    let sy = CMat::from_row_slice(2, 2, &[C::new(z, z), C::new(z, -o), C::new(z, o), C::new(z, z)]);
    let sz = CMat::from_row_slice(2, 2, &[C::new(o, z), C::new(z, z), C::new(z, z), C::new(-o, z)]);
    [sx, sy, sz]
}

/// Swap operator on two factors of dimension `d`.
pub fn swap<T: Real>(d: usize) -> CMat<T> {
    let mut s = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(j * d + i, i * d + j)] = re(T::one());
        }
    }
    s
}

/// Column vector of the unnormalized maximally entangled state `Σ |ii⟩`.
pub fn gamma_vector<T: Real>(d: usize) -> CMat<T> {
    let mut v = CMat::zeros(d * d, 1);
    for i in 0..d {
        v[(i * d + i, 0)] = re(T::one());
    }
    v
}

/// Casts a matrix between scalar types.
pub fn cast<S: Real, T: Real>(m: &CMat<S>) -> CMat<T> {
    m.map(|z| C::new(T::lit(z.re.as_f64()), T::lit(z.im.as_f64())))
}
