//! Dense complex square matrices and the few spectral routines the
//! measurement constructions need.
//!
//! Hermitian eigendecompositions and SVDs are delegated to `nalgebra`; the
//! simultaneous diagonalization of commuting unitaries and the real span
//! rank are built on top of them here.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance for algebraic identities at small dimension.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigenvalues closer than this are treated as one degenerate eigenvalue.
pub const CLUSTER_GAP: f64 = 1e-8;

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

const JACOBI_SWEEPS: usize = 8;

const COMBINATION_SEED: u64 = 0x5eed_0f_c0ffee;

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.len()));
        }
        Ok(Self { dim, data: rows.concat() })
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |r, c| if r == c { values[r] } else { C64::new(0.0, 0.0) })
    }

    /// `|v⟩⟨v|` for a (not necessarily normalized) vector.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        Self::from_fn(n, |r, c| v[r] * v[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.matmul_unchecked(other))
    }

    fn matmul_unchecked(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out[r * n..(r + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Self { dim: n, data: out }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| self.get(r / m, c / m) * other.get(r % m, c % m))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn commutator_norm(&self, other: &Self) -> f64 {
        let ab = self.matmul_unchecked(other);
        let ba = other.matmul_unchecked(self);
        ab.distance(&ba)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul_unchecked(self).distance(&Self::identity(self.dim))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.distance(&self.adjoint())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_projection(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.matmul_unchecked(self).distance(self) <= tol
    }

    /// Rank of a projection, read off its trace.
    pub fn projection_rank(&self) -> usize {
        self.trace().re.round().max(0.0) as usize
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(self.dim, other.dim))
        }
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        OperatorMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        OperatorMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        self.matmul_unchecked(rhs)
    }
}

/// Hilbert–Schmidt inner product `tr(A* B)`.
pub fn hs_inner(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<C64> {
    a.check_dim(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &OperatorMatrix, b: &OperatorMatrix) -> C64 {
    let n = a.dim;
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            acc += a.data[r * n + c] * b.data[c * n + r];
        }
    }
    acc
}

/// Sum of a list of equally sized matrices.
pub fn sum<'a>(dim: usize, mats: impl IntoIterator<Item = &'a OperatorMatrix>) -> OperatorMatrix {
    mats.into_iter().fold(OperatorMatrix::zeros(dim), |acc, m| &acc + m)
}

// The QR iteration leaves residuals near 1e-10 on clustered spectra; cyclic
// Jacobi sweeps on the nearly diagonal `Vᵀ A V` bring them to rounding level.
fn jacobi_polish(a: &DMatrix<f64>, eig: SymmetricEigen<f64, nalgebra::Dyn>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let n = a.nrows();
    let mut v = eig.eigenvectors;
    let mut m = v.transpose() * a * &v;
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen { eigenvalues: m.diagonal(), eigenvectors: v }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
///
/// Solved through the real symmetric embedding `[[A, −B], [B, A]]` of
/// `A + iB`, whose spectrum is that of the input with every multiplicity
/// doubled; each doubled eigenspace is folded back to complex vectors.
pub fn hermitian_eigen(h: &OperatorMatrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    let n = h.dim;
    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = (h.get(r, c) + h.get(c, r).conj()) * 0.5;
            real[(r, c)] = z.re;
            real[(r + n, c + n)] = z.re;
            real[(r, c + n)] = -z.im;
            real[(r + n, c)] = z.im;
        }
    }
    let eig = jacobi_polish(&real, SymmetricEigen::new(real.clone()));
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(Ordering::Equal));

    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < CLUSTER_GAP {
            end += 1;
        }
        let mut candidates: Vec<Vec<C64>> = order[start..end]
            .iter()
            .map(|&i| {
                let col = eig.eigenvectors.column(i);
                (0..n).map(|r| C64::new(col[r], col[r + n])).collect()
            })
            .collect();
        // pivoted Gram–Schmidt: the cluster spans (end − start)/2 complex dimensions
        let mut picked: Vec<Vec<C64>> = Vec::new();
        for _ in 0..(end - start).div_ceil(2) {
            let (best, norm) = candidates
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
                .expect("nonempty cluster");
            let q: Vec<C64> = candidates.swap_remove(best).iter().map(|z| z / norm).collect();
            for v in &mut candidates {
                let overlap: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in v.iter_mut().zip(&q) {
                    *x -= a * overlap;
                }
            }
            picked.push(q);
        }
        for (k, q) in picked.into_iter().enumerate() {
            values.push(eig.eigenvalues[order[start + 2 * k]]);
            vectors.push(q);
        }
        start = end;
    }
    (values, vectors)
}

// Splits an orthonormal basis of a subspace by the eigenvalues of the
// compression of a Hermitian operator to that subspace.
fn split_subspace(basis: &[Vec<C64>], h: &OperatorMatrix) -> Vec<Vec<Vec<C64>>> {
    let k = basis.len();
    if k <= 1 {
        return vec![basis.to_vec()];
    }
    let n = h.dim();
    let hv: Vec<Vec<C64>> = basis
        .iter()
        .map(|v| (0..n).map(|r| (0..n).map(|c| h.get(r, c) * v[c]).sum()).collect())
        .collect();
    let compressed = OperatorMatrix::from_fn(k, |r, c| {
        basis[r].iter().zip(&hv[c]).map(|(a, b)| a.conj() * b).sum()
    });
    let (values, vectors) = hermitian_eigen(&compressed);
    let mut groups: Vec<Vec<Vec<C64>>> = Vec::new();
    let mut last: Option<f64> = None;
    for (val, w) in values.iter().zip(vectors) {
        let lifted: Vec<C64> = (0..n).map(|r| (0..k).map(|j| basis[j][r] * w[j]).sum()).collect();
        match last {
            Some(prev) if val - prev < CLUSTER_GAP => groups.last_mut().unwrap().push(lifted),
            _ => groups.push(vec![lifted]),
        }
        last = Some(*val);
    }
    groups
}

fn real_part(u: &OperatorMatrix) -> OperatorMatrix {
    (&u.adjoint() + u).scale_real(0.5)
}

fn imag_part(u: &OperatorMatrix) -> OperatorMatrix {
    (u - &u.adjoint()).scale(C64::new(0.0, -0.5))
}

/// A joint eigenprojection together with the eigenvalue of each input operator on it.
#[derive(Clone, Debug)]
pub struct JointEigenspace {
    pub projection: OperatorMatrix,
    pub eigenvalues: Vec<C64>,
}

impl JointEigenspace {
    pub fn rank(&self) -> usize {
        self.projection.projection_rank()
    }
}

/// Maps an eigenvalue to its angle in `[0, 2π)`, quantized for ordering.
pub fn angle_key(z: C64) -> i64 {
    let mut a = z.arg();
    if a < 0.0 {
        a += 2.0 * PI;
    }
    let key = (a * 1e8).round() as i64;
    if key >= (2.0 * PI * 1e8).round() as i64 {
        0
    } else {
        key
    }
}

/// Simultaneous spectral decomposition of a commuting family of unitaries.
///
/// A seeded random Hermitian combination of the family is diagonalized first;
/// each cluster of its eigenvalues is then split further by the real and
/// imaginary parts of every operator. Output is sorted by the tuple of
/// eigenvalue angles, lexicographically.
pub fn joint_eigenspaces(ops: &[OperatorMatrix], tol: f64) -> Result<Vec<JointEigenspace>> {
    let Some(first) = ops.first() else {
        return Err(Error::Unsupported("empty operator family".into()));
    };
    let n = first.dim();
    for u in ops {
        first.check_dim(u)?;
        let defect = u.unitarity_defect();
        if defect > tol {
            return Err(Error::NonUnitary(defect));
        }
    }
    for (i, a) in ops.iter().enumerate() {
        for b in &ops[i + 1..] {
            let c = a.commutator_norm(b);
            if c > tol {
                return Err(Error::NonCommuting(c));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(COMBINATION_SEED);
    let mut combo = OperatorMatrix::zeros(n);
    for u in ops {
        let (c_re, c_im): (f64, f64) = (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
        combo = &combo + &(&real_part(u).scale_real(c_re) + &imag_part(u).scale_real(c_im));
    }
    let identity_basis: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    let mut spaces = split_subspace(&identity_basis, &combo);
    for u in ops {
        for part in [real_part(u), imag_part(u)] {
            spaces = spaces.iter().flat_map(|b| split_subspace(b, &part)).collect();
        }
    }

    let mut out: Vec<JointEigenspace> = spaces
        .into_iter()
        .map(|basis| {
            let projection = sum(n, &basis.iter().map(|v| OperatorMatrix::outer(v)).collect::<Vec<_>>());
            let rank = basis.len() as f64;
            let eigenvalues = ops.iter().map(|u| trace_product(u, &projection) / rank).collect();
            JointEigenspace { projection, eigenvalues }
        })
        .collect();
    out.sort_by_key(|s| s.eigenvalues.iter().map(|&z| angle_key(z)).collect::<Vec<_>>());

    let total = sum(n, out.iter().map(|s| &s.projection));
    let completeness = total.distance(&OperatorMatrix::identity(n));
    if completeness > tol.max(1e-9) {
        return Err(Error::NonCommuting(completeness));
    }
    Ok(out)
}

/// Eigenprojections only; see [`joint_eigenspaces`].
pub fn joint_eigenprojections(ops: &[OperatorMatrix], tol: f64) -> Result<Vec<OperatorMatrix>> {
    Ok(joint_eigenspaces(ops, tol)?.into_iter().map(|s| s.projection).collect())
}

/// Real coordinates of a Hermitian matrix in an orthonormal basis of the
/// real Hermitian space (diagonal entries, then `√2·Re`, `√2·Im` of the upper triangle).
pub fn hermitian_coordinates(h: &OperatorMatrix) -> Vec<f64> {
    let n = h.dim();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(h.get(i, i).re);
    }
    let s2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            let z = h.get(i, j);
            v.push(s2 * z.re);
            v.push(s2 * z.im);
        }
    }
    v
}

/// Inverse of [`hermitian_coordinates`].
pub fn from_hermitian_coordinates(n: usize, coords: &[f64]) -> Result<OperatorMatrix> {
    if coords.len() != n * n {
        return Err(Error::DimensionMismatch(coords.len(), n * n));
    }
    let mut h = OperatorMatrix::zeros(n);
    for i in 0..n {
        h.set(i, i, C64::new(coords[i], 0.0));
    }
    let s2 = std::f64::consts::SQRT_2;
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = C64::new(coords[k] / s2, coords[k + 1] / s2);
            h.set(i, j, z);
            h.set(j, i, z.conj());
            k += 2;
        }
    }
    Ok(h)
}

/// Singular values of the real frame matrix whose rows are the Hermitian coordinates.
pub fn frame_singular_values(mats: &[OperatorMatrix], tol: f64) -> Result<Vec<f64>> {
    let Some(first) = mats.first() else {
        return Ok(Vec::new());
    };
    let n2 = first.dim() * first.dim();
    let mut rows = Vec::with_capacity(mats.len() * n2);
    for m in mats {
        first.check_dim(m)?;
        let defect = m.hermiticity_defect();
        if defect > tol {
            return Err(Error::NonHermitian(defect));
        }
        rows.extend(hermitian_coordinates(m));
    }
    let frame = DMatrix::from_row_slice(mats.len(), n2, &rows);
    let svd = frame.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    Ok(sv)
}

/// Dimension of the real span of a set of Hermitian matrices.
///
/// Singular values below `rel_tol · σ_max` count as zero.
pub fn real_span_rank(mats: &[OperatorMatrix], rel_tol: f64) -> Result<usize> {
    let sv = frame_singular_values(mats, DEFAULT_TOL.max(1e-9))?;
    let Some(&max) = sv.first() else {
        return Ok(0);
    };
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * max).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli() -> [OperatorMatrix; 4] {
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        [
            OperatorMatrix::identity(2),
            OperatorMatrix::from_rows(&[vec![o, l], vec![l, o]]).unwrap(),
            OperatorMatrix::from_rows(&[vec![o, -i], vec![i, o]]).unwrap(),
            OperatorMatrix::diag(&[l, -l]),
        ]
    }

    #[test]
    fn hs_inner_examples() {
        let [id, x, _, z] = pauli();
        assert!((hs_inner(&id, &id).unwrap() - 2.0).norm() < 1e-15);
        assert!(hs_inner(&x, &z).unwrap().norm() < 1e-15);
        let a = OperatorMatrix::from_fn(3, |r, cc| c(r as f64, cc as f64 - 1.0));
        let self_ip = hs_inner(&a, &a).unwrap();
        assert!((self_ip.re - a.frobenius_norm().powi(2)).abs() < 1e-12 && self_ip.im.abs() < 1e-12);
        assert!(hs_inner(&id, &a).is_err());
    }

    #[test]
    fn kron_and_products() {
        let [id, x, _, z] = pauli();
        let xz = x.kron(&z);
        assert_eq!(xz.dim(), 4);
        assert!((&x.kron(&id) * &id.kron(&z)).distance(&xz) < 1e-15);
        assert!(xz.is_unitary(1e-12) && xz.is_hermitian(1e-12));
        assert!(!x.is_projection(1e-12));
        let p = (&id + &z).scale_real(0.5);
        assert!(p.is_projection(1e-12));
        assert_eq!(p.projection_rank(), 1);
    }

    #[test]
    fn joint_eigenprojections_identity_and_z() {
        let [id, _, _, z] = pauli();
        let one = joint_eigenprojections(&[id.clone()], DEFAULT_TOL).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].distance(&id) < 1e-12);
        let zs = joint_eigenprojections(&[z], DEFAULT_TOL).unwrap();
        assert_eq!(zs.len(), 2);
        assert!(zs[0].distance(&OperatorMatrix::diag(&[c(1.0, 0.0), c(0.0, 0.0)])) < 1e-12);
        assert!(zs[1].distance(&OperatorMatrix::diag(&[c(0.0, 0.0), c(1.0, 0.0)])) < 1e-12);
    }

    #[test]
    fn joint_eigenprojections_rejects_bad_input() {
        let [_, x, _, z] = pauli();
        assert!(matches!(joint_eigenprojections(&[x.clone(), z], DEFAULT_TOL), Err(Error::NonCommuting(_))));
        let not_unitary = x.scale_real(2.0);
        assert!(matches!(joint_eigenprojections(&[not_unitary], DEFAULT_TOL), Err(Error::NonUnitary(_))));
    }

    #[test]
    fn joint_eigenprojections_degenerate_family() {
        // Z⊗I and I⊗Z jointly, plus Z⊗Z; eigenvalue of Z⊗I is degenerate on its own
        let [id, _, _, z] = pauli();
        let ops = vec![z.kron(&id), id.kron(&z), z.kron(&z)];
        let spaces = joint_eigenspaces(&ops, DEFAULT_TOL).unwrap();
        assert_eq!(spaces.len(), 4);
        for s in &spaces {
            assert_eq!(s.rank(), 1);
        }
        for (i, a) in spaces.iter().enumerate() {
            for (j, b) in spaces.iter().enumerate() {
                let prod = &a.projection * &b.projection;
                let want = if i == j { a.projection.clone() } else { OperatorMatrix::zeros(4) };
                assert!(prod.distance(&want) < 1e-10);
            }
        }
        for (k, u) in ops.iter().enumerate() {
            let rebuilt = sum(4, &spaces.iter().map(|s| s.projection.scale(s.eigenvalues[k])).collect::<Vec<_>>());
            assert!(rebuilt.distance(u) < 1e-9);
        }
        // single operator with a doubly degenerate spectrum
        let coarse = joint_eigenspaces(&ops[..1], DEFAULT_TOL).unwrap();
        assert_eq!(coarse.iter().map(JointEigenspace::rank).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn span_rank_examples() {
        let [id, x, y, z] = pauli();
        assert_eq!(real_span_rank(&[id.clone()], RANK_TOL).unwrap(), 1);
        assert_eq!(real_span_rank(&[id.clone(), x, y, z.clone()], RANK_TOL).unwrap(), 4);
        let p = (&id + &z).scale_real(0.5);
        assert_eq!(real_span_rank(&[p.clone(), p], RANK_TOL).unwrap(), 1);
        let skew = OperatorMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        assert!(matches!(real_span_rank(&[skew], RANK_TOL), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn hermitian_coordinates_are_isometric() {
        let h = OperatorMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, -1.0)],
            vec![c(2.0, 1.0), c(-3.0, 0.0)],
        ])
        .unwrap();
        let v = hermitian_coordinates(&h);
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        assert!((norm2 - h.frobenius_norm().powi(2)).abs() < 1e-12);
        assert!(from_hermitian_coordinates(2, &v).unwrap().distance(&h) < 1e-14);
        assert!(from_hermitian_coordinates(3, &v).is_err());
    }

    #[test]
    fn hermitian_eigen_residuals_on_clustered_spectrum() {
        // Re/Im combination of a Weyl operator of order 3 on C^6: three double eigenvalues
        let u = crate::weyl::zd_weyl(&crate::phase_space::PhasePoint::new(2, 0, 6).unwrap());
        for (cr, ci) in [(0.7, 1.3), (1.1, 0.6), (0.93, 1.41)] {
            let h = &real_part(&u).scale_real(cr) + &imag_part(&u).scale_real(ci);
            let (vals, vecs) = hermitian_eigen(&h);
            for (l, v) in vals.iter().zip(&vecs) {
                let res: f64 = (0..6)
                    .map(|r| ((0..6).map(|c| h.get(r, c) * v[c]).sum::<C64>() - v[r] * *l).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-13, "residual {res:e}");
            }
        }
    }
}
