//! Weyl operators and their eigenprojections.
//!
//! Two families live here:
//!
//! * the cyclic-group unitaries `U(m, n) = X^m Z^n` on `C^d`, indexed by
//!   phase points of `Z_d²`;
//! * the finite-field operators `W(a, x)` on `L²(F_q)`, with
//!   `W(a, x) = α(a, x) U_x V_{ax}` for a finite slope `a` and `W(∞, x) = V_x`,
//!   tensored over the prime-power factors of `d`.
//!
//! The phase `α(a, x)` is chosen so that `x ↦ W(a, x)` is a genuine
//! representation of the additive group for each slope.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cmat::{self, joint_eigenspaces, OperatorMatrix, C64, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::gfq::FieldTable;
use crate::phase_space::{IsotropicLine, PhasePoint};
use crate::zmod::{factorize, Factorization};

/// Default bound on the Hilbert-space dimension for operator constructions.
pub const MAX_DIMENSION: u64 = 36;

fn root_of_unity(k: u64, n: u64) -> C64 {
    let k = k % n;
    match (4 * k).checked_rem(n) {
        // exact values on the axes keep products of roots exact
        Some(0) => match 4 * k / n {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        },
        _ => C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64),
    }
}

/// `U(m, n) = X^m Z^n` with `X|j⟩ = |j+1⟩`, `Z|j⟩ = ω^j |j⟩`, `ω = e^{2πi/d}`.
pub fn zd_weyl(point: &PhasePoint) -> OperatorMatrix {
    let d = point.d as usize;
    let mut u = OperatorMatrix::zeros(d);
    for j in 0..d {
        let row = (j + point.m as usize) % d;
        u.set(row, j, root_of_unity(point.n * j as u64, point.d));
    }
    u
}

/// A slope `a ∈ F_q ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slope {
    Finite(u32),
    Infinity,
}

impl Slope {
    /// All `q + 1` slopes, finite ones first.
    pub fn all(q: u64) -> impl Iterator<Item = Slope> {
        (0..q as u32).map(Slope::Finite).chain(std::iter::once(Slope::Infinity))
    }

    /// Integer code with `q` standing for infinity.
    pub fn code(&self, q: u64) -> u64 {
        match self {
            Slope::Finite(a) => *a as u64,
            Slope::Infinity => q,
        }
    }

    pub fn from_code(code: u64, q: u64) -> Result<Slope> {
        match code.cmp(&q) {
            std::cmp::Ordering::Less => Ok(Slope::Finite(code as u32)),
            std::cmp::Ordering::Equal => Ok(Slope::Infinity),
            std::cmp::Ordering::Greater => Err(Error::OutOfRange(format!("slope code {code} > {q}"))),
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Finite(a) => write!(f, "{a}"),
            Slope::Infinity => write!(f, "∞"),
        }
    }
}

/// Phase `α(a, x)` obeying `α(a,x) α(a,y) ⟨ax, y⟩ = α(a, x+y)` and `α(a, 0) = 1`.
///
/// Odd characteristic: `χ(2^{−1} a x²)`. Characteristic two: `i^{Q(x)}` for the
/// `Z_4`-valued lift `Q` of `x ↦ Tr(a x²)` built on the polynomial basis, with
/// `Q(e_k) = Tr(a e_k²) ∈ {0, 1}` and cross terms `2 Tr(a e_k e_l)`.
pub fn alpha_phase(field: &FieldTable, a: u32, x: u32) -> C64 {
    if x == 0 {
        return C64::new(1.0, 0.0);
    }
    match field.half() {
        Some(half) => field.chi(field.mul(half, field.mul(a, field.mul(x, x)))),
        None => {
            let bits = field.digits(x);
            let basis: Vec<u32> = (0..field.s()).map(|k| 1u32 << k).collect();
            let mut q4 = 0u32;
            for k in 0..bits.len() {
                if bits[k] == 0 {
                    continue;
                }
                let ek = basis[k];
                q4 += field.trace(field.mul(a, field.mul(ek, ek)));
                for l in k + 1..bits.len() {
                    if bits[l] == 1 {
                        q4 += 2 * field.trace(field.mul(a, field.mul(ek, basis[l])));
                    }
                }
            }
            match q4 % 4 {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, 1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, -1.0),
            }
        }
    }
}

/// `W(a, x)` on `L²(F_q)` in the basis `{|y⟩}`: `W(a,x)|y⟩ = α(a,x)⟨ax, y⟩|x + y⟩`,
/// and `W(∞, x)|y⟩ = ⟨x, y⟩|y⟩`.
pub fn gf_weyl(field: &FieldTable, a: Slope, x: u32) -> Result<OperatorMatrix> {
    let q = field.size();
    if x as usize >= q {
        return Err(Error::OutOfRange(format!("x = {x} not in GF({q})")));
    }
    if let Slope::Finite(a) = a {
        if a as usize >= q {
            return Err(Error::OutOfRange(format!("a = {a} not in GF({q})")));
        }
    }
    let mut w = OperatorMatrix::zeros(q);
    match a {
        Slope::Infinity => {
            for y in 0..q as u32 {
                w.set(y as usize, y as usize, field.bichar(x, y));
            }
        }
        Slope::Finite(a) => {
            let alpha = alpha_phase(field, a, x);
            let ax = field.mul(a, x);
            for y in 0..q as u32 {
                w.set(field.add(x, y) as usize, y as usize, alpha * field.bichar(ax, y));
            }
        }
    }
    Ok(w)
}

/// `P(a, z) = q^{−1} Σ_y conj⟨z, y⟩ W(a, y)`.
pub fn proj_p(field: &FieldTable, a: Slope, z: u32) -> Result<OperatorMatrix> {
    let q = field.size();
    if z as usize >= q {
        return Err(Error::OutOfRange(format!("z = {z} not in GF({q})")));
    }
    let mut p = OperatorMatrix::zeros(q);
    for y in 0..q as u32 {
        let w = gf_weyl(field, a, y)?;
        p = &p + &w.scale(field.bichar(z, y).conj());
    }
    Ok(p.scale_real(1.0 / q as f64))
}

/// The fields `F_{d_j}` of the prime-power factors of `d`, with `H = ⊗ L²(F_{d_j})`.
#[derive(Clone, Debug)]
pub struct FieldFactors {
    factorization: Factorization,
    fields: Vec<FieldTable>,
}

impl FieldFactors {
    pub fn new(d: u64) -> Result<Self> {
        Self::with_bound(d, MAX_DIMENSION)
    }

    pub fn with_bound(d: u64, bound: u64) -> Result<Self> {
        if d < 2 || d > bound {
            return Err(Error::InvalidModulus { d, reason: format!("dimension must lie in 2..={bound}") });
        }
        let factorization = factorize(d)?;
        let fields = factorization
            .factors()
            .iter()
            .map(|f| FieldTable::new(f.p, f.s))
            .collect::<Result<_>>()?;
        Ok(Self { factorization, fields })
    }

    pub fn from_factorization(factorization: &Factorization) -> Result<Self> {
        Self::new(factorization.d())
    }

    pub fn d(&self) -> u64 {
        self.factorization.d()
    }

    pub fn dim(&self) -> usize {
        self.factorization.d() as usize
    }

    pub fn k(&self) -> usize {
        self.fields.len()
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn fields(&self) -> &[FieldTable] {
        &self.fields
    }

    pub fn field(&self, j: usize) -> &FieldTable {
        &self.fields[j]
    }

    /// `⊗_j A_j` where `factor_op(j)` returns `None` for the identity.
    pub fn ampliate(&self, mut factor_op: impl FnMut(usize) -> Result<Option<OperatorMatrix>>) -> Result<OperatorMatrix> {
        let mut out = OperatorMatrix::identity(1);
        for (j, f) in self.fields.iter().enumerate() {
            let op = factor_op(j)?.unwrap_or_else(|| OperatorMatrix::identity(f.size()));
            out = out.kron(&op);
        }
        Ok(out)
    }
}

/// One tensor factor of a field Weyl label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GfEntry {
    pub factor: usize,
    pub a: Slope,
    pub x: u32,
}

/// `W(a, x) = ∏_{j ∈ J} W^{(j)}(a_j, x_j)` with support `J` strictly increasing
/// and `x_j ≠ 0`. The empty support is the identity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GfWeylLabel {
    entries: Vec<GfEntry>,
}

impl GfWeylLabel {
    pub fn identity() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn new(mut entries: Vec<GfEntry>) -> Result<Self> {
        entries.sort();
        if entries.windows(2).any(|w| w[0].factor == w[1].factor) {
            return Err(Error::OutOfRange("repeated factor in support".into()));
        }
        if entries.iter().any(|e| e.x == 0) {
            return Err(Error::OutOfRange("x must be nonzero on the support".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[GfEntry] {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.factor).collect()
    }

    pub fn entry(&self, factor: usize) -> Option<&GfEntry> {
        self.entries.iter().find(|e| e.factor == factor)
    }
}

impl fmt::Display for GfWeylLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> =
            self.entries.iter().map(|e| format!("W{}({},{})", e.factor + 1, e.a, e.x)).collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

pub fn gf_operator(label: &GfWeylLabel, fields: &FieldFactors) -> Result<OperatorMatrix> {
    if let Some(bad) = label.entries.iter().find(|e| e.factor >= fields.k()) {
        return Err(Error::OutOfRange(format!("factor {} beyond k = {}", bad.factor, fields.k())));
    }
    fields.ampliate(|j| match label.entry(j) {
        Some(e) => gf_weyl(fields.field(j), e.a, e.x).map(Some),
        None => Ok(None),
    })
}

/// All `d²` labels of the tensor unitary basis, identity first, then by
/// support (in subset order) and entry values.
pub fn unitary_basis_labels(fields: &FieldFactors) -> Vec<GfWeylLabel> {
    let k = fields.k();
    let mut labels = vec![GfWeylLabel::identity()];
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let mut partial: Vec<Vec<GfEntry>> = vec![Vec::new()];
        for &j in &support {
            let q = fields.field(j).order();
            let mut next = Vec::new();
            for prefix in &partial {
                for a in Slope::all(q) {
                    for x in 1..q as u32 {
                        let mut e = prefix.clone();
                        e.push(GfEntry { factor: j, a, x });
                        next.push(e);
                    }
                }
            }
            partial = next;
        }
        labels.extend(partial.into_iter().map(|entries| GfWeylLabel { entries }));
    }
    labels
}

/// The unitary basis of `B(H)` formed by the identity and all supported tensor Weyl operators.
pub fn unitary_basis_f(fields: &FieldFactors) -> Result<Vec<(GfWeylLabel, OperatorMatrix)>> {
    unitary_basis_labels(fields)
        .into_iter()
        .map(|l| gf_operator(&l, fields).map(|op| (l, op)))
        .collect()
}

/// `∏_{j ∈ J} P^{(j)}(a_j, y_j)` ampliated to `H`; rank `∏_{j ∉ J} d_j`.
pub fn tensor_proj(labels: &[(usize, Slope, u32)], fields: &FieldFactors) -> Result<OperatorMatrix> {
    let mut seen = vec![false; fields.k()];
    for &(j, _, _) in labels {
        if j >= fields.k() || std::mem::replace(&mut seen[j], true) {
            return Err(Error::OutOfRange(format!("bad factor index {j} in projection label")));
        }
    }
    fields.ampliate(|j| match labels.iter().find(|l| l.0 == j) {
        Some(&(_, a, y)) => proj_p(fields.field(j), a, y).map(Some),
        None => Ok(None),
    })
}

/// Label of one outcome of a projective measurement.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    /// Eigenvalues `exp(iπ e/d)` of the line generators (exponents `e ∈ Z_{2d}`),
    /// plus the vertical shift `i` of `(λ, i)` where that labeling is faithful.
    Line { phases: Vec<u64>, shift: Option<u64> },
    /// Per-factor outcomes `y_j` of `∏ P(a_j, y_j)`.
    Field { values: Vec<u32> },
    /// Eigenvalue exponents `exp(iπ e/d)` of each member of a commuting family.
    Spectrum { phases: Vec<u64> },
}

/// Mutually orthogonal projections summing to the identity.
#[derive(Clone, Debug)]
pub struct ProjectionSystem {
    pub labels: Vec<OutcomeLabel>,
    pub projections: Vec<OperatorMatrix>,
    pub context: String,
}

impl ProjectionSystem {
    pub fn dim(&self) -> usize {
        self.projections.first().map_or(0, OperatorMatrix::dim)
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    /// Largest deviation from `P_i P_j = δ_ij P_i` and `Σ P_i = I`.
    pub fn resolution_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = cmat::sum(n, &self.projections).distance(&OperatorMatrix::identity(n));
        for (i, a) in self.projections.iter().enumerate() {
            for (j, b) in self.projections.iter().enumerate() {
                let prod = a * b;
                let err = if i == j { prod.distance(a) } else { prod.frobenius_norm() };
                worst = worst.max(err);
            }
        }
        worst
    }

    pub fn position(&self, label: &OutcomeLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Exponent `e ∈ Z_{2d}` with `z ≈ exp(iπ e/d)`.
pub fn phase_exponent(z: C64, d: u64) -> u64 {
    let turns = z.arg() / PI * d as f64;
    (turns.round() as i64).rem_euclid(2 * d as i64) as u64
}

/// Reference eigenvalue exponents for the lines `λ_b = ⟨(1, b)⟩`.
///
/// `refs[b] = e_b` picks, on each such line, the eigenvector on which
/// `U(1, b)` has eigenvalue `exp(iπ e_b/d)`. The choice is made so that
/// `U(σ)` has the same eigenvalue on the reference vectors of every line
/// through `σ`; labeling the other eigenvectors by vertical shift
/// (`e = e_b − 2i`) then makes `d·Tr(P_(λ,i) P_(λ',j))` equal the number of
/// common points of the shifted lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftReference {
    d: u64,
    refs: Vec<u64>,
}

impl ShiftReference {
    pub fn new(d: u64) -> Option<Self> {
        // Eigenvalue exponent of U(m, bm) on the reference vector of λ_b is
        // e_b·m − b·m(m−1) (mod 2d), using U(m, bm) = ω^{−b m(m−1)/2} (X Z^b)^m.
        let exponent = |b: u64, e: u64, m: u64| -> u64 {
            let (b, e, m) = (b as i128, e as i128, m as i128);
            (e * m - b * m * (m - 1)).rem_euclid(2 * d as i128) as u64
        };
        // shared points of λ_b and λ_b' (b' < b): first coordinates m with (b − b')m ≡ 0
        let mut refs: Vec<u64> = Vec::with_capacity(d as usize);
        fn search(
            b: u64,
            d: u64,
            refs: &mut Vec<u64>,
            exponent: &dyn Fn(u64, u64, u64) -> u64,
        ) -> bool {
            if b == d {
                return true;
            }
            // (X Z^b)^d = ω^{b d(d−1)/2}, so e_b ≡ b(d−1) (mod 2)
            let parity = (b * (d - 1)) % 2;
            for e in (parity..2 * d).step_by(2) {
                let consistent = (0..b).all(|bp| {
                    (1..d)
                        .filter(|&m| ((b - bp) * m) % d == 0)
                        .all(|m| exponent(b, e, m) == exponent(bp, refs[bp as usize], m))
                });
                if consistent {
                    refs.push(e);
                    if search(b + 1, d, refs, exponent) {
                        return true;
                    }
                    refs.pop();
                }
            }
            false
        }
        search(0, d, &mut refs, &exponent).then_some(Self { d, refs })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn reference(&self, b: u64) -> u64 {
        self.refs[b as usize]
    }

    /// Vertical shift labeling the eigenvector of `U(1, b)` with exponent `e`.
    pub fn shift_of(&self, b: u64, e: u64) -> Option<u64> {
        let diff = (self.refs[b as usize] + 2 * self.d - e) % (2 * self.d);
        (diff % 2 == 0).then_some(diff / 2)
    }
}

/// Slope `b` of a line of the form `{(m, bm)}`, if it is one.
pub fn graph_slope(line: &IsotropicLine) -> Option<u64> {
    if !line.has_faithful_shifts() {
        return None;
    }
    line.points().iter().find(|p| p.m == 1).map(|p| p.n)
}

/// The `d` rank-one joint eigenprojections of `{U(σ) : σ ∈ λ}`.
///
/// Outcomes are labeled by the eigenvalues of the line generators; for lines
/// meeting the vertical axis only at the origin the `(λ, i)` shift is attached
/// using `shifts`.
pub fn line_eigenbasis(line: &IsotropicLine, shifts: Option<&ShiftReference>) -> Result<ProjectionSystem> {
    let d = line.d();
    if line.points().len() as u64 != d || !line.group().is_isotropic() {
        return Err(Error::NotLagrangian(line.to_string()));
    }
    let gens = line.generators();
    let mut ops: Vec<OperatorMatrix> = gens.iter().map(zd_weyl).collect();
    let slope = graph_slope(line);
    let shift_gen = slope.map(|b| PhasePoint { m: 1, n: b, d });
    if let Some(g) = shift_gen {
        ops.push(zd_weyl(&g));
    }
    let spaces = joint_eigenspaces(&ops, DEFAULT_TOL)?;
    if let Some(bad) = spaces.iter().find(|s| s.rank() != 1) {
        return Err(Error::DegenerateSpectrum(bad.rank()));
    }
    let mut labels = Vec::with_capacity(spaces.len());
    let mut projections = Vec::with_capacity(spaces.len());
    for s in spaces {
        let phases: Vec<u64> = s.eigenvalues[..gens.len()].iter().map(|&z| phase_exponent(z, d)).collect();
        let shift = match (slope, shifts) {
            (Some(b), Some(r)) if r.d() == d => r.shift_of(b, phase_exponent(s.eigenvalues[gens.len()], d)),
            _ => None,
        };
        labels.push(OutcomeLabel::Line { phases, shift });
        projections.push(s.projection);
    }
    Ok(ProjectionSystem { labels, projections, context: format!("line {line}") })
}
