//! Dense complex tensors and the small linear-algebra kernel used everywhere else.
//!
//! Conventions: tensors are row-major; operators are vectorized by column
//! stacking, so `vec(ρ)[i + d·j] = ρ[i, j]` and `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
//! Composite systems are ordered with subsystem 0 as the most significant
//! digit of the joint index.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![ZERO; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Axis permutation: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let r = self.shape.len();
        let mut seen = vec![false; r];
        if axes.len() != r || axes.iter().any(|&a| a >= r || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::ShapeMismatch(format!("bad permutation {axes:?} for rank {r}")));
        }
        let in_strides = strides(&self.shape);
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[src]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                src += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape: new_shape, data: out })
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: vec![r, c], data }
    }

    /// View a tensor as a matrix after grouping the first `row_axes` axes into rows.
    pub fn to_matrix(&self, row_axes: usize) -> Result<CMatrix> {
        if row_axes > self.shape.len() {
            return invalid("row_axes exceeds tensor rank");
        }
        let r: usize = self.shape[..row_axes].iter().product();
        let c: usize = self.shape[row_axes..].iter().product();
        Ok(CMatrix::from_row_slice(r, c, &self.data))
    }

    /// Tensor dot product over the paired axes; free axes of `self` come first.
    pub fn contract(&self, axes_a: &[usize], other: &Self, axes_b: &[usize]) -> Result<Self> {
        if axes_a.len() != axes_b.len() {
            return Err(Error::ShapeMismatch("contracted axis lists differ in length".into()));
        }
        for (&a, &b) in axes_a.iter().zip(axes_b) {
            if a >= self.shape.len() || b >= other.shape.len() || self.shape[a] != other.shape[b] {
                return Err(Error::ShapeMismatch(format!(
                    "cannot contract axis {a} of {:?} with axis {b} of {:?}",
                    self.shape, other.shape
                )));
            }
        }
        let free_a: Vec<usize> = (0..self.shape.len()).filter(|a| !axes_a.contains(a)).collect();
        let free_b: Vec<usize> = (0..other.shape.len()).filter(|b| !axes_b.contains(b)).collect();
        let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
        let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
        let ma = self.permute(&perm_a)?.to_matrix(free_a.len())?;
        let mb = other.permute(&perm_b)?.to_matrix(axes_b.len())?;
        let prod = ma * mb;
        let shape: Vec<usize> = free_a
            .iter()
            .map(|&a| self.shape[a])
            .chain(free_b.iter().map(|&b| other.shape[b]))
            .collect();
        Self::new(shape, CMatrix::from(prod).transpose().as_slice().to_vec())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn devectorize(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} cannot form a {rows}x{cols} matrix",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Superoperator of the unitary conjugation ρ ↦ UρU†.
pub fn unitary_superop(u: &CMatrix) -> CMatrix {
    kron(&u.map(|z| z.conj()), u)
}

/// Subsystem dimensions of the input and output legs of a superoperator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LegGrouping {
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

impl LegGrouping {
    pub fn square(dims: &[usize]) -> Self {
        Self { input: dims.to_vec(), output: dims.to_vec() }
    }

    fn validate(&self) -> Result<(usize, usize)> {
        if self.input.is_empty() || self.output.is_empty() || self.input.iter().chain(&self.output).any(|&d| d == 0) {
            return invalid("leg grouping needs non-empty, non-zero dimensions");
        }
        Ok((self.input.iter().product(), self.output.iter().product()))
    }
}

fn digits(mut x: usize, dims: &[usize], out: &mut [usize]) {
    for i in (0..dims.len()).rev() {
        out[i] = x % dims[i];
        x /= dims[i];
    }
}

fn rft_index_map(g: &LegGrouping) -> Result<(usize, usize, Vec<usize>)> {
    let (din, dout) = g.validate()?;
    let (m_in, m_out) = (g.input.len(), g.output.len());
    let rows = dout * dout;
    let cols = din * din;
    let mut map = vec![0usize; rows * cols];
    let mut ob = vec![0; m_out];
    let mut ok = vec![0; m_out];
    let mut ib = vec![0; m_in];
    let mut ik = vec![0; m_in];
    for r in 0..rows {
        digits(r / dout, &g.output, &mut ob);
        digits(r % dout, &g.output, &mut ok);
        for c in 0..cols {
            digits(c / din, &g.input, &mut ib);
            digits(c % din, &g.input, &mut ik);
            let mut t = 0usize;
            for l in 0..m_in {
                t = t * g.input[l] * g.input[l] + ib[l] * g.input[l] + ik[l];
            }
            for l in 0..m_out {
                t = t * g.output[l] * g.output[l] + ob[l] * g.output[l] + ok[l];
            }
            map[r * cols + c] = t;
        }
    }
    Ok((rows, cols, map))
}

/// Reshuffle a superoperator into a tensor with one fused (bra, ket) leg per
/// subsystem: axes are `(α_0, …, α_{m-1}, β_0, …, β_{m'-1})` with inputs first.
pub fn rft_transform(superop: &CMatrix, grouping: &LegGrouping) -> Result<ComplexTensor> {
    let (rows, cols, map) = rft_index_map(grouping)?;
    if superop.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "superoperator is {:?}, grouping expects {rows}x{cols}",
            superop.shape()
        )));
    }
    let mut data = vec![ZERO; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            data[map[r * cols + c]] = superop[(r, c)];
        }
    }
    let shape = grouping
        .input
        .iter()
        .chain(&grouping.output)
        .map(|d| d * d)
        .collect();
    ComplexTensor::new(shape, data)
}

pub fn inverse_rft(tensor: &ComplexTensor, grouping: &LegGrouping) -> Result<CMatrix> {
    let (rows, cols, map) = rft_index_map(grouping)?;
    let expected: Vec<usize> = grouping.input.iter().chain(&grouping.output).map(|d| d * d).collect();
    if tensor.shape() != expected.as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "tensor shape {:?} does not match grouping {expected:?}",
            tensor.shape()
        )));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = tensor.data()[map[r * cols + c]];
        }
    }
    Ok(m)
}

/// Trace out the subsystems listed in `traced`.
pub fn partial_trace(op: &CMatrix, dims: &[usize], traced: &[usize]) -> Result<CMatrix> {
    let d: usize = dims.iter().product();
    if op.shape() != (d, d) {
        return Err(Error::ShapeMismatch(format!(
            "operator is {:?}, dims {dims:?} give {d}",
            op.shape()
        )));
    }
    if traced.iter().any(|&t| t >= dims.len()) {
        return invalid("traced subsystem index out of range");
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|i| !traced.contains(i)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&i| dims[i]).collect();
    let dk: usize = kept_dims.iter().product();
    let mut out = CMatrix::zeros(dk, dk);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    for r in 0..d {
        digits(r, dims, &mut ri);
        for c in 0..d {
            digits(c, dims, &mut ci);
            if traced.iter().any(|&t| ri[t] != ci[t]) {
                continue;
            }
            let (mut rk, mut ck) = (0, 0);
            for &k in &kept {
                rk = rk * dims[k] + ri[k];
                ck = ck * dims[k] + ci[k];
            }
            out[(rk, ck)] += op[(r, c)];
        }
    }
    Ok(out)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch("Hermitian input must be square".into()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermiticity_deviation(m);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let id = CMatrix::identity(u.nrows(), u.ncols());
    (u.adjoint() * u - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the orthonormal eigenvectors.
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    check_hermitian(m)?;
    let sym = m.adjoint().scale(0.5) + m.scale(0.5);
    let n = sym.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(sym, f64::EPSILON, 100 * n.max(1) * n.max(1))
        .ok_or(Error::NoConvergence(100 * n * n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok(HermitianEigen { values, vectors })
}

/// `exp(-iH)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigen(h)?;
    let phases = CVector::from_iterator(eig.values.len(), eig.values.iter().map(|&l| C64::from_polar(1.0, -l)));
    let scaled = CMatrix::from_fn(h.nrows(), h.ncols(), |i, j| eig.vectors[(i, j)] * phases[j]);
    Ok(scaled * eig.vectors.adjoint())
}

/// Spectrum of a real square matrix with its leading left/right eigenvectors.
#[derive(Clone, Debug)]
pub struct RealSpectrum {
    /// Sorted by descending magnitude.
    pub eigenvalues: Vec<C64>,
    /// Right eigenvector `r` of the leading eigenvalue, scaled to unit max-norm.
    pub right: CVector,
    /// Left eigenvector `l` (`lᵀ M = λ lᵀ`) with `lᵀ r = 1`.
    pub left: CVector,
}

fn sort_by_magnitude(vals: &mut [C64]) {
    vals.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

pub fn real_eigenvalues(m: &RMatrix) -> Result<Vec<C64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::ShapeMismatch("eigenvalues need a non-empty square matrix".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let n = m.nrows();
    let cap = 100 * n;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, cap).ok_or(Error::NoConvergence(cap))?;
    let mut vals: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    sort_by_magnitude(&mut vals);
    Ok(vals)
}

/// Orthonormal basis of the numerical kernel of `a`, `count` vectors.
fn kernel_vectors(a: &CMatrix, count: usize) -> Result<Vec<CVector>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidArgument("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    Ok(order
        .iter()
        .take(count)
        .map(|&i| v_t.row(i).adjoint())
        .collect())
}

fn shifted(m: &CMatrix, lambda: C64) -> CMatrix {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= lambda;
    }
    a
}

fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

fn normalize_max(v: &mut CVector) {
    let (mut best, mut arg) = (0.0, ZERO);
    for z in v.iter() {
        if z.norm() > best + 1e-14 {
            best = z.norm();
            arg = *z;
        }
    }
    if best > 0.0 {
        let s = arg.conj() / (best * best);
        *v *= s;
    }
}

pub fn real_spectrum(m: &RMatrix) -> Result<RealSpectrum> {
    let eigenvalues = real_eigenvalues(m)?;
    let lead = eigenvalues[0];
    let mc = to_complex(m);
    let mut right = kernel_vectors(&shifted(&mc, lead), 1)?.remove(0);
    normalize_max(&mut right);
    let mut left = kernel_vectors(&shifted(&mc.transpose(), lead), 1)?.remove(0);
    let pairing = left.transpose() * &right;
    let p = pairing[(0, 0)];
    if p.norm() < 1e-12 {
        return invalid("leading eigenvalue is defective: left/right eigenvectors are orthogonal");
    }
    left /= p;
    Ok(RealSpectrum { eigenvalues, right, left })
}

/// Full eigendecomposition `M = R Λ L` of a diagonalisable real matrix.
#[derive(Clone, Debug)]
pub struct EigenTriples {
    pub values: Vec<C64>,
    /// Column `i` is the right eigenvector of `values[i]`.
    pub right: CMatrix,
    /// Row `i` is the left eigenvector of `values[i]`, with `L R = I`.
    pub left: CMatrix,
}

pub fn eigen_triples(m: &RMatrix) -> Result<EigenTriples> {
    let values = real_eigenvalues(m)?;
    let n = values.len();
    let mc = to_complex(m);
    let scale = m.iter().map(|x| x.abs()).fold(1e-300, f64::max);
    let mut right = CMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (values[j] - values[i]).norm() < 1e-8 * scale {
            j += 1;
        }
        let vecs = kernel_vectors(&shifted(&mc, values[i]), j - i)?;
        for (k, mut v) in vecs.into_iter().enumerate() {
            normalize_max(&mut v);
            right.set_column(i + k, &v);
        }
        i = j;
    }
    let left = right
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("matrix is not diagonalisable".into()))?;
    Ok(EigenTriples { values, right, left })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(seed: u64, n: usize) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn permute_matches_manual_transpose() {
        let t = ComplexTensor::new(vec![2, 3, 4], (0..24).map(|x| c(x as f64, 0.0)).collect()).unwrap();
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for cc in 0..4 {
                    assert_eq!(p.get(&[cc, a, b]), t.get(&[a, b, cc]));
                }
            }
        }
    }

    #[test]
    fn contract_is_matrix_product() {
        let a = random_matrix(1, 3);
        let b = random_matrix(2, 3);
        let ta = ComplexTensor::from_matrix(&a);
        let tb = ComplexTensor::from_matrix(&b);
        let prod = ta.contract(&[1], &tb, &[0]).unwrap();
        assert!(prod.max_abs_diff(&ComplexTensor::from_matrix(&(a * b))) < 1e-14);
    }

    #[test]
    fn vectorize_is_column_stacking() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]);
        let v = vectorize(&m);
        assert_eq!(v.as_slice(), &[c(1., 0.), c(3., 0.), c(2., 0.), c(4., 0.)]);
        assert_eq!(devectorize(&v, 2, 2).unwrap(), m);
        assert!(devectorize(&v, 3, 2).is_err());
    }

    #[test]
    fn superop_acts_as_conjugation() {
        let u = expm_hermitian(&{
            let h = random_matrix(3, 4);
            &h + h.adjoint()
        })
        .unwrap();
        let rho = random_matrix(4, 4);
        let lhs = unitary_superop(&u) * vectorize(&rho);
        let rhs = vectorize(&(&u * &rho * u.adjoint()));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rft_identity_superop_is_vec_identity_outer_product() {
        // RFT of the identity superop on one qubit has T[α, β] = δ_{αβ}.
        let s = CMatrix::identity(4, 4);
        let t = rft_transform(&s, &LegGrouping::square(&[2])).unwrap();
        assert_eq!(t.shape(), &[4, 4]);
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((t.get(&[a, b]) - c(want, 0.0)).norm() < 1e-15);
            }
        }
        assert!(rft_transform(&CMatrix::identity(3, 3), &LegGrouping::square(&[2])).is_err());
    }

    #[test]
    fn rft_entries_follow_index_convention() {
        // T[(a'a), (b'b)] = ⟨b| E(|a⟩⟨a'|) |b'⟩ for a single subsystem.
        let s = random_matrix(9, 9);
        let t = rft_transform(&s, &LegGrouping::square(&[3])).unwrap();
        for a in 0..3 {
            for ap in 0..3 {
                let mut e = CMatrix::zeros(3, 3);
                e[(a, ap)] = ONE;
                let out = devectorize(&(&s * vectorize(&e)), 3, 3).unwrap();
                for b in 0..3 {
                    for bp in 0..3 {
                        assert!((t.get(&[ap * 3 + a, bp * 3 + b]) - out[(b, bp)]).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = random_matrix(5, 2);
        let b = random_matrix(6, 3);
        let ab = kron(&a, &b);
        let ta = partial_trace(&ab, &[2, 3], &[1]).unwrap();
        let tb = partial_trace(&ab, &[2, 3], &[0]).unwrap();
        assert!((ta - &a * b.trace()).norm() < 1e-13);
        assert!((tb - &b * a.trace()).norm() < 1e-13);
        assert!(partial_trace(&ab, &[2, 2], &[0]).is_err());
    }

    #[test]
    fn expm_of_pauli_x() {
        let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let theta: f64 = 0.37;
        let u = expm_hermitian(&x.scale(theta)).unwrap();
        let want = CMatrix::identity(2, 2).scale(theta.cos()) - x.map(|z| z * c(0.0, theta.sin()));
        assert!((u - want).norm() < 1e-14);
        let bad = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(expm_hermitian(&bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn real_spectrum_of_two_state_chain() {
        let (a, b) = (0.1, 0.3);
        let t = RMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]);
        let s = real_spectrum(&t).unwrap();
        assert!((s.eigenvalues[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(1.0 - a - b, 0.0)).norm() < 1e-14);
        assert!((s.right[0] - ONE).norm() < 1e-14 && (s.right[1] - ONE).norm() < 1e-14);
        assert!((s.left[0].re - b / (a + b)).abs() < 1e-14);
        assert!((s.left[1].re - a / (a + b)).abs() < 1e-14);
    }

    #[test]
    fn rotation_has_complex_pair() {
        let t = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let vals = real_eigenvalues(&t).unwrap();
        assert!((vals[0] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((vals[1] - c(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn eigen_triples_reconstruct() {
        let m = RMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.3, 0.1, 0.6, 0.3, 0.2, 0.2, 0.6]);
        let e = eigen_triples(&m).unwrap();
        let lam = CMatrix::from_diagonal(&CVector::from_vec(e.values.clone()));
        let rec = &e.right * lam * &e.left;
        assert!((rec - to_complex(&m)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn rft_round_trip(seed in 0u64..1000, d0 in 1usize..4, d1 in 1usize..3) {
            let dims = [d0, d1];
            let d = d0 * d1;
            let s = random_matrix(seed, d * d);
            let g = LegGrouping::square(&dims);
            let t = rft_transform(&s, &g).unwrap();
            let back = inverse_rft(&t, &g).unwrap();
            prop_assert!((back - s).norm() < 1e-10);
        }

        #[test]
        fn vectorize_round_trip(seed in 0u64..1000, n in 1usize..6) {
            let m = random_matrix(seed, n);
            prop_assert!((devectorize(&vectorize(&m), n, n).unwrap() - &m).norm() < 1e-10);
        }

        #[test]
        fn partial_trace_preserves_trace(seed in 0u64..1000) {
            let m = random_matrix(seed, 12);
            for traced in [vec![0], vec![1], vec![2], vec![0, 2]] {
                let t = partial_trace(&m, &[2, 3, 2], &traced).unwrap();
                prop_assert!((t.trace() - m.trace()).norm() < 1e-12);
            }
        }

        #[test]
        fn expm_is_unitary(seed in 0u64..1000, n in 1usize..7) {
            let h = random_matrix(seed, n);
            let h = &h + h.adjoint();
            let u = expm_hermitian(&h).unwrap();
            prop_assert!(unitarity_deviation(&u) < 1e-12);
        }
    }
}
