use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cmat::{from_hermitian_coordinates, hermitian_coordinates, hermitian_eigen, trace_product, OperatorMatrix, C64, RANK_TOL};
use crate::error::{Error, Result};
use crate::weyl::{tensor_proj, FieldFactors, Slope};

/// Tolerance on Hermiticity, positivity and unit trace of a state.
pub const DENSITY_TOL: f64 = 1e-10;

/// Relative residual above which probabilities are rejected as inconsistent.
const CONSISTENCY_TOL: f64 = 1e-6;

/// A quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: OperatorMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: OperatorMatrix) -> Result<Self> {
        let herm = matrix.hermiticity_defect();
        if herm > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let (values, _) = hermitian_eigen(&matrix);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: OperatorMatrix::identity(d).scale_real(1.0 / d as f64) }
    }

    /// `|ψ⟩⟨ψ|` for a nonzero vector, normalized.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::InvalidDensity("zero vector".into()));
        }
        Self::new(OperatorMatrix::outer(psi).scale_real(1.0 / norm2))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        self.matrix.distance(&other.matrix)
    }
}

/// `G G* / Tr(G G*)` for a complex Gaussian `d × d` matrix `G`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = OperatorMatrix::from_fn(d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    let mut m = gg.scale_real(1.0 / tr);
    // symmetrize away rounding
    m = (&m + &m.adjoint()).scale_real(0.5);
    DensityMatrix { matrix: m }
}

/// The `index`-th state of the stream seeded by `seed`.
pub fn seeded_density(d: usize, seed: u64, index: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    random_density(d, &mut rng)
}

/// Born probabilities `Tr(ρ P)`.
pub fn simulate_probabilities(rho: &DensityMatrix, projs: &[OperatorMatrix]) -> Result<Vec<f64>> {
    projs
        .iter()
        .map(|p| {
            if p.dim() != rho.dim() {
                return Err(Error::DimensionMismatch(p.dim(), rho.dim()));
            }
            Ok(trace_product(rho.matrix(), p).re)
        })
        .collect()
}

/// The trace-one Hermitian `ρ̂` with `Tr(ρ̂ P_i) = probs_i`, by least squares
/// on the traceless part.
pub fn reconstruct_linear(probs: &[f64], projs: &[OperatorMatrix], d: usize) -> Result<DensityMatrix> {
    if probs.len() != projs.len() {
        return Err(Error::DimensionMismatch(probs.len(), projs.len()));
    }
    let n2 = d * d;
    let mut rows = Vec::with_capacity(projs.len() * n2);
    let mut rhs = Vec::with_capacity(projs.len());
    for (p, &prob) in projs.iter().zip(probs) {
        if p.dim() != d {
            return Err(Error::DimensionMismatch(p.dim(), d));
        }
        let tr = p.trace().re;
        let traceless = p - &OperatorMatrix::identity(d).scale_real(tr / d as f64);
        rows.extend(hermitian_coordinates(&traceless));
        rhs.push(prob - tr / d as f64);
    }
    let a = DMatrix::from_row_slice(projs.len(), n2, &rows);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_TOL * max.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < n2 - 1 {
        return Err(Error::IncompleteDesign { rank: rank + 1, needed: n2 });
    }
    let y = svd.solve(&b, cutoff).map_err(|e| Error::Unsupported(e.to_string()))?;
    let residual = (&a * &y - &b).norm() / b.norm().max(1.0);
    if residual > CONSISTENCY_TOL {
        return Err(Error::InconsistentProbabilities(residual));
    }
    let coords: Vec<f64> = y.iter().copied().collect();
    let delta = from_hermitian_coordinates(d, &coords)?;
    DensityMatrix::new(&OperatorMatrix::identity(d).scale_real(1.0 / d as f64) + &delta)
}

/// Index convention for the inclusion–exclusion formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IeConvention {
    /// `x` over all of `F_q` on each supported factor, `J` over all subsets,
    /// `S(∅) = Tr(ρ)·I`. Reproduces `ρ`.
    AllShifts,
    /// `x ∈ F_q \ {0}` and `J` nonempty. Kept for comparison only; does not
    /// reproduce `ρ`.
    Literal,
}

/// `(factor, a, x)` per supported factor, sorted by factor. Empty for `J = ∅`.
pub type IeKey = Vec<(usize, Slope, u32)>;

pub type IeProbabilities = BTreeMap<IeKey, f64>;

/// All keys the formula needs under `convention`, grouped by subset `J`.
pub fn ie_keys(fields: &FieldFactors, convention: IeConvention) -> Vec<IeKey> {
    let k = fields.k();
    let x_start = match convention {
        IeConvention::AllShifts => 0,
        IeConvention::Literal => 1,
    };
    let mut keys = Vec::new();
    for mask in 0u32..(1 << k) {
        if mask == 0 && convention == IeConvention::Literal {
            continue;
        }
        let mut partial: Vec<IeKey> = vec![Vec::new()];
        for j in (0..k).filter(|j| mask & (1 << j) != 0) {
            let q = fields.field(j).order();
            let mut next = Vec::new();
            for prefix in &partial {
                for a in Slope::all(q) {
                    for x in x_start..q as u32 {
                        let mut key = prefix.clone();
                        key.push((j, a, x));
                        next.push(key);
                    }
                }
            }
            partial = next;
        }
        keys.extend(partial);
    }
    keys
}

/// `Tr(ρ P_J(a, x))` for every key; the empty key carries `Tr(ρ)`.
pub fn ie_probabilities(rho: &DensityMatrix, fields: &FieldFactors, convention: IeConvention) -> Result<IeProbabilities> {
    if rho.dim() != fields.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), fields.dim()));
    }
    ie_keys(fields, convention)
        .into_iter()
        .map(|key| {
            let p = if key.is_empty() { rho.matrix().trace().re } else { trace_product(rho.matrix(), &tensor_proj(&key, fields)?).re };
            Ok((key, p))
        })
        .collect()
}

fn describe(key: &IeKey) -> String {
    let parts: Vec<String> = key.iter().map(|(j, a, x)| format!("{j}:({a},{x})")).collect();
    format!("J-term [{}]", parts.join(" "))
}

/// `Σ_J (−1)^{k−|J|} S_ρ(J)` with `S_ρ(J) = Σ_{a,x} Tr(ρ P(a,x)) P(a,x)`.
pub fn inclusion_exclusion_sum(probs: &IeProbabilities, fields: &FieldFactors, convention: IeConvention) -> Result<OperatorMatrix> {
    let k = fields.k();
    let d = fields.dim();
    let mut total = OperatorMatrix::zeros(d);
    for key in ie_keys(fields, convention) {
        let p = *probs.get(&key).ok_or_else(|| Error::MissingProbability(describe(&key)))?;
        let sign = if (k - key.len()) % 2 == 0 { 1.0 } else { -1.0 };
        let proj = if key.is_empty() { OperatorMatrix::identity(d) } else { tensor_proj(&key, fields)? };
        total = &total + &proj.scale_real(sign * p);
    }
    Ok(total)
}

/// Inclusion–exclusion reconstruction from the field-basis projection probabilities.
pub fn reconstruct_inclusion_exclusion(
    probs: &IeProbabilities,
    fields: &FieldFactors,
    convention: IeConvention,
) -> Result<DensityMatrix> {
    DensityMatrix::new(inclusion_exclusion_sum(probs, fields, convention)?)
}
