//! Maximal abelian subsystems (MASSes) of a unitary system and minimal
//! covers of the system by them.
//!
//! A unitary system is a unitary basis with the identity removed. Two
//! structured families of MASSes are built in closed form: the nonzero points
//! of an isotropic line (cyclic-group basis) and the operators sharing a
//! slope tuple (field basis). Commutation-graph cliques give a slow generic
//! route used for cross-checking.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cmat::OperatorMatrix;
use crate::error::{Error, Result};
use crate::phase_space::{all_points, enumerate_isotropic_lines, IsotropicLine, PhasePoint};
use crate::weyl::{gf_operator, unitary_basis_labels, zd_weyl, FieldFactors, GfEntry, GfWeylLabel, Slope};

/// Node budget for the exact set-cover search.
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

/// Dimension bound for the clique-based MASS search.
pub const MAX_CLIQUE_DIMENSION: u64 = 8;

/// Label of a non-identity element of a unitary system.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpLabel {
    Zd(PhasePoint),
    Gf(GfWeylLabel),
}

impl fmt::Display for OpLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpLabel::Zd(p) => write!(f, "U{p}"),
            OpLabel::Gf(l) => write!(f, "{l}"),
        }
    }
}

/// Which unitary basis the labels refer to.
#[derive(Clone, Debug)]
pub enum UnitarySystem {
    /// `{U(m, n)}` on `C^d`.
    Zd { d: u64 },
    /// Tensor products of finite-field Weyl operators.
    Gf(FieldFactors),
}

impl UnitarySystem {
    pub fn zd(d: u64) -> Result<Self> {
        if !(2..=crate::weyl::MAX_DIMENSION).contains(&d) {
            return Err(Error::InvalidModulus { d, reason: "dimension out of range".into() });
        }
        Ok(Self::Zd { d })
    }

    pub fn gf(d: u64) -> Result<Self> {
        Ok(Self::Gf(FieldFactors::new(d)?))
    }

    pub fn d(&self) -> u64 {
        match self {
            Self::Zd { d } => *d,
            Self::Gf(f) => f.d(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d() as usize
    }

    /// All non-identity labels, in canonical order.
    pub fn labels(&self) -> Vec<OpLabel> {
        match self {
            Self::Zd { d } => all_points(*d).filter(|p| !p.is_origin()).map(OpLabel::Zd).collect(),
            Self::Gf(f) => unitary_basis_labels(f).into_iter().skip(1).map(OpLabel::Gf).collect(),
        }
    }

    pub fn operator(&self, label: &OpLabel) -> Result<OperatorMatrix> {
        match (self, label) {
            (Self::Zd { d }, OpLabel::Zd(p)) if p.d == *d => Ok(zd_weyl(p)),
            (Self::Gf(f), OpLabel::Gf(l)) => gf_operator(l, f),
            _ => Err(Error::Unsupported(format!("label {label} does not belong to this unitary system"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MassSource {
    Line(IsotropicLine),
    Slopes(Vec<Slope>),
    Clique,
}

/// A maximal set of pairwise commuting, non-identity basis elements.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mass {
    members: BTreeSet<OpLabel>,
    source: MassSource,
}

impl Mass {
    pub fn members(&self) -> &BTreeSet<OpLabel> {
        &self.members
    }

    pub fn source(&self) -> &MassSource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: &OpLabel) -> bool {
        self.members.contains(label)
    }
}

impl fmt::Display for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            MassSource::Line(l) => write!(f, "line {l}"),
            MassSource::Slopes(a) => {
                let parts: Vec<String> = a.iter().map(ToString::to_string).collect();
                write!(f, "slopes ({})", parts.join(","))
            }
            MassSource::Clique => write!(f, "clique of {}", self.members.len()),
        }
    }
}

/// `{U(σ) : σ ∈ λ, σ ≠ 0}`.
pub fn mass_from_line(line: &IsotropicLine) -> Result<Mass> {
    if line.points().len() as u64 != line.d() || !line.group().is_isotropic() {
        return Err(Error::NotLagrangian(line.to_string()));
    }
    Ok(Mass {
        members: line.points().iter().filter(|p| !p.is_origin()).map(|p| OpLabel::Zd(*p)).collect(),
        source: MassSource::Line(line.clone()),
    })
}

/// All `W(b, x)` whose slopes agree with `a` on their support.
pub fn mass_from_a_tuple(a: &[Slope], fields: &FieldFactors) -> Result<Mass> {
    if a.len() != fields.k() {
        return Err(Error::DimensionMismatch(a.len(), fields.k()));
    }
    for (j, slope) in a.iter().enumerate() {
        if let Slope::Finite(v) = slope {
            if *v as u64 >= fields.field(j).order() {
                return Err(Error::OutOfRange(format!("slope {v} not in GF({})", fields.field(j).order())));
            }
        }
    }
    let k = fields.k();
    let mut members = BTreeSet::new();
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let mut partial: Vec<Vec<GfEntry>> = vec![Vec::new()];
        for &j in &support {
            let q = fields.field(j).order() as u32;
            partial = partial
                .into_iter()
                .flat_map(|prefix| {
                    (1..q).map(move |x| {
                        let mut e = prefix.clone();
                        e.push(GfEntry { factor: j, a: a[j], x });
                        e
                    })
                })
                .collect();
        }
        for entries in partial {
            members.insert(OpLabel::Gf(GfWeylLabel::new(entries)?));
        }
    }
    Ok(Mass { members, source: MassSource::Slopes(a.to_vec()) })
}

/// Line MASSes of the cyclic-group basis, in canonical line order.
pub fn line_masses(d: u64) -> Result<Vec<Mass>> {
    enumerate_isotropic_lines(d)?.iter().map(mass_from_line).collect()
}

/// All full-support slope tuples, lexicographic with `∞` last in each coordinate.
pub fn slope_tuples(fields: &FieldFactors) -> Vec<Vec<Slope>> {
    let mut tuples: Vec<Vec<Slope>> = vec![Vec::new()];
    for f in fields.fields() {
        tuples = tuples
            .into_iter()
            .flat_map(|prefix| {
                Slope::all(f.order()).map(move |s| {
                    let mut t = prefix.clone();
                    t.push(s);
                    t
                })
            })
            .collect();
    }
    tuples
}

pub fn slope_masses(fields: &FieldFactors) -> Result<Vec<Mass>> {
    slope_tuples(fields).iter().map(|a| mass_from_a_tuple(a, fields)).collect()
}

/// The structured MASS family of a unitary system.
pub fn structured_masses(system: &UnitarySystem) -> Result<Vec<Mass>> {
    match system {
        UnitarySystem::Zd { d } => line_masses(*d),
        UnitarySystem::Gf(f) => slope_masses(f),
    }
}

/// Checks pairwise commutation of the members and maximality against the
/// rest of the system, numerically at `tol`.
pub fn verify_mass(mass: &Mass, system: &UnitarySystem, tol: f64) -> Result<()> {
    let members: Vec<OperatorMatrix> = mass.members.iter().map(|l| system.operator(l)).collect::<Result<_>>()?;
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            let c = a.commutator_norm(b);
            if c > tol {
                return Err(Error::NonCommuting(c));
            }
        }
    }
    for label in system.labels() {
        if mass.contains(&label) {
            continue;
        }
        let op = system.operator(&label)?;
        if members.iter().all(|m| m.commutator_norm(&op) <= tol) {
            return Err(Error::Unsupported(format!("{mass} is not maximal: {label} commutes with every member")));
        }
    }
    Ok(())
}

/// Maximal cliques of the commutation graph (Bron–Kerbosch with pivoting).
///
/// Exponential in general; restricted to `d ≤ 8`.
pub fn masses_by_cliques(system: &UnitarySystem, tol: f64) -> Result<Vec<Mass>> {
    if system.d() > MAX_CLIQUE_DIMENSION {
        return Err(Error::Unsupported(format!("clique search limited to d ≤ {MAX_CLIQUE_DIMENSION}")));
    }
    let labels = system.labels();
    let ops: Vec<OperatorMatrix> = labels.iter().map(|l| system.operator(l)).collect::<Result<_>>()?;
    let n = labels.len();
    let mut adj = vec![BTreeSet::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if ops[i].commutator_norm(&ops[j]) <= tol {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut cliques = Vec::new();
    bron_kerbosch(&adj, Vec::new(), (0..n).collect(), BTreeSet::new(), &mut cliques);
    let mut masses: Vec<Mass> = cliques
        .into_iter()
        .map(|c| Mass { members: c.into_iter().map(|i| labels[i].clone()).collect(), source: MassSource::Clique })
        .collect();
    masses.sort();
    Ok(masses)
}

fn bron_kerbosch(
    adj: &[BTreeSet<usize>],
    r: Vec<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        out.push(r);
        return;
    }
    let pivot = p.union(&x).max_by_key(|&&u| adj[u].intersection(&p).count()).copied();
    let candidates: Vec<usize> = match pivot {
        Some(u) => p.difference(&adj[u]).copied().collect(),
        None => p.iter().copied().collect(),
    };
    for v in candidates {
        let mut r2 = r.clone();
        r2.push(v);
        let p2 = p.intersection(&adj[v]).copied().collect();
        let x2 = x.intersection(&adj[v]).copied().collect();
        bron_kerbosch(adj, r2, p2, x2, out);
        p.remove(&v);
        x.insert(v);
    }
}

/// A set of MASSes whose union is the whole unitary system.
#[derive(Clone, Debug)]
pub struct MassCover {
    pub masses: Vec<Mass>,
    /// Indices of the chosen masses in the candidate list.
    pub chosen: Vec<usize>,
    pub covered: BTreeSet<OpLabel>,
    /// Whether the branch-and-bound search finished within its budget.
    pub exact: bool,
    /// Best lower bound on the cover size proven by the search.
    pub lower_bound: usize,
    pub nodes: u64,
}

impl MassCover {
    pub fn delta(&self) -> usize {
        self.masses.len()
    }

    /// `delta − lower_bound`; zero when the cover is proven optimal.
    pub fn optimality_gap(&self) -> usize {
        self.delta() - self.lower_bound
    }
}

type Bits = Vec<u64>;

fn bit_set(bits: &mut Bits, i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn bit_get(bits: &Bits, i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

fn count_new(set: &Bits, covered: &Bits) -> usize {
    set.iter().zip(covered).map(|(s, c)| (s & !c).count_ones() as usize).sum()
}

struct CoverSearch<'a> {
    sets: &'a [Bits],
    containing: &'a [Vec<usize>],
    universe: usize,
    max_size: usize,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
    aborted: bool,
}

impl CoverSearch<'_> {
    fn run(&mut self, covered: &Bits, n_covered: usize, chosen: &mut Vec<usize>) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.aborted = true;
            return;
        }
        if n_covered == self.universe {
            if chosen.len() < self.best.len() {
                self.best = chosen.clone();
            }
            return;
        }
        let remaining = self.universe - n_covered;
        let lb = remaining.div_ceil(self.max_size);
        if chosen.len() + lb >= self.best.len() {
            return;
        }
        // branch on the uncovered element with the fewest candidate sets
        let pick = (0..self.universe)
            .filter(|&e| !bit_get(covered, e))
            .min_by_key(|&e| self.containing[e].len())
            .expect("uncovered element exists");
        for &s in &self.containing[pick] {
            let gain = count_new(&self.sets[s], covered);
            let next: Bits = covered.iter().zip(&self.sets[s]).map(|(c, x)| c | x).collect();
            chosen.push(s);
            self.run(&next, n_covered + gain, chosen);
            chosen.pop();
            if self.aborted {
                return;
            }
        }
    }
}

/// Smallest set of candidate masses whose union is `basis_labels`.
///
/// Exact branch-and-bound seeded with the greedy cover; if `budget` nodes
/// are exhausted, the best cover found is returned with `exact = false`.
pub fn minimal_cover(masses: &[Mass], basis_labels: &BTreeSet<OpLabel>, budget: u64) -> Result<MassCover> {
    let elements: Vec<&OpLabel> = basis_labels.iter().collect();
    let universe = elements.len();
    let words = universe.div_ceil(64).max(1);
    let sets: Vec<Bits> = masses
        .iter()
        .map(|m| {
            let mut b = vec![0u64; words];
            for (i, e) in elements.iter().enumerate() {
                if m.contains(e) {
                    bit_set(&mut b, i);
                }
            }
            b
        })
        .collect();
    let containing: Vec<Vec<usize>> =
        (0..universe).map(|e| (0..sets.len()).filter(|&s| bit_get(&sets[s], e)).collect()).collect();
    let uncovered = containing.iter().filter(|c| c.is_empty()).count();
    if uncovered > 0 {
        return Err(Error::CoverIncomplete(uncovered));
    }
    let max_size = sets.iter().map(|s| count_new(s, &vec![0; words])).max().unwrap_or(1).max(1);

    // greedy upper bound, ties broken by candidate order
    let mut covered = vec![0u64; words];
    let mut n_covered = 0;
    let mut greedy = Vec::new();
    while n_covered < universe {
        let (s, gain) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, count_new(s, &covered)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("nonempty candidates");
        greedy.push(s);
        n_covered += gain;
        for (c, x) in covered.iter_mut().zip(&sets[s]) {
            *c |= x;
        }
    }

    let mut search = CoverSearch {
        sets: &sets,
        containing: &containing,
        universe,
        max_size,
        best: greedy,
        nodes: 0,
        budget,
        aborted: false,
    };
    search.run(&vec![0u64; words], 0, &mut Vec::new());
    let exact = !search.aborted;
    let mut chosen = search.best;
    chosen.sort_unstable();
    let lower_bound = if exact { chosen.len() } else { universe.div_ceil(max_size) };
    Ok(MassCover {
        masses: chosen.iter().map(|&i| masses[i].clone()).collect(),
        chosen,
        covered: basis_labels.clone(),
        exact,
        lower_bound,
        nodes: search.nodes,
    })
}

/// Minimal cover of a unitary system by its structured MASSes.
pub fn system_cover(system: &UnitarySystem) -> Result<MassCover> {
    let masses = structured_masses(system)?;
    let labels: BTreeSet<OpLabel> = system.labels().into_iter().collect();
    minimal_cover(&masses, &labels, DEFAULT_NODE_BUDGET)
}
