//! State tomography from elementary measurements.
//!
//! Each MASS of a cover yields an orthonormal eigenbasis, i.e. an elementary
//! measurement. Measurements whose MASSes share a cyclic subgroup all refine
//! the eigenspaces of its generator; such a club can drop one outcome per
//! block in every member but the first, since the dropped probability is
//! fixed by the others.

mod design;
mod reconstruct;

use std::collections::BTreeSet;

use crate::cmat::{self, joint_eigenspaces, real_span_rank, trace_product, OperatorMatrix, C64, DEFAULT_TOL, RANK_TOL};
use crate::error::{Error, Result};
use crate::mass_cover::{Mass, MassSource, OpLabel, UnitarySystem};
use crate::weyl::{line_eigenbasis, phase_exponent, tensor_proj, FieldFactors, OutcomeLabel, ProjectionSystem, ShiftReference, Slope};

pub use design::{select_clubs, Basis, Club, Design, DroppedOutcome, KeptOutcome};
pub use reconstruct::{
    ie_keys, ie_probabilities, random_density, reconstruct_inclusion_exclusion, reconstruct_linear,
    seeded_density, simulate_probabilities, DensityMatrix, IeConvention, IeKey, IeProbabilities, DENSITY_TOL,
};

/// Tolerance on projection identities (orthogonality, completeness, recovery).
pub const PROJECTION_TOL: f64 = 1e-10;

/// Tolerance on `Tr(Q_t P_j) ∈ {0, 1}` when assigning outcomes to blocks.
const BLOCK_MATCH_TOL: f64 = 1e-8;

/// `d` mutually orthogonal rank-one projections summing to the identity.
#[derive(Clone, Debug)]
pub struct ElementaryMeasurement {
    projections: ProjectionSystem,
    source: Mass,
}

impl ElementaryMeasurement {
    pub fn new(projections: ProjectionSystem, source: Mass) -> Result<Self> {
        let d = projections.dim();
        if projections.len() != d {
            return Err(Error::DimensionMismatch(projections.len(), d));
        }
        if let Some(p) = projections.projections.iter().find(|p| p.projection_rank() != 1) {
            return Err(Error::DegenerateSpectrum(p.projection_rank()));
        }
        let defect = projections.resolution_defect();
        if defect > PROJECTION_TOL {
            return Err(Error::NotResolution(defect));
        }
        Ok(Self { projections, source })
    }

    pub fn dim(&self) -> usize {
        self.projections.dim()
    }

    pub fn projections(&self) -> &[OperatorMatrix] {
        &self.projections.projections
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.projections.labels
    }

    pub fn system(&self) -> &ProjectionSystem {
        &self.projections
    }

    pub fn source(&self) -> &Mass {
        &self.source
    }
}

/// The joint eigenbasis of a MASS.
///
/// Line MASSes are labeled by generator eigenvalues (and vertical shifts where
/// faithful), slope MASSes by the outcomes `y` of `∏ P(a_j, y_j)`, anything
/// else by the eigenvalues of every member.
pub fn measurement_from_mass(mass: &Mass, system: &UnitarySystem) -> Result<ElementaryMeasurement> {
    let projections = match (mass.source(), system) {
        (MassSource::Line(line), UnitarySystem::Zd { .. }) => {
            let shifts = if line.has_faithful_shifts() { ShiftReference::new(line.d()) } else { None };
            line_eigenbasis(line, shifts.as_ref())?
        }
        (MassSource::Slopes(a), UnitarySystem::Gf(fields)) => slope_eigenbasis(a, fields)?,
        _ => spectrum_eigenbasis(mass, system)?,
    };
    ElementaryMeasurement::new(projections, mass.clone())
}

fn slope_eigenbasis(a: &[Slope], fields: &FieldFactors) -> Result<ProjectionSystem> {
    let mut outcomes: Vec<Vec<u32>> = vec![Vec::new()];
    for f in fields.fields() {
        let q = f.order() as u32;
        outcomes = outcomes
            .into_iter()
            .flat_map(|prefix| {
                (0..q).map(move |y| {
                    let mut v = prefix.clone();
                    v.push(y);
                    v
                })
            })
            .collect();
    }
    let mut projections = Vec::with_capacity(outcomes.len());
    for y in &outcomes {
        let factors: Vec<(usize, Slope, u32)> = y.iter().enumerate().map(|(j, &yj)| (j, a[j], yj)).collect();
        projections.push(tensor_proj(&factors, fields)?);
    }
    let parts: Vec<String> = a.iter().map(ToString::to_string).collect();
    Ok(ProjectionSystem {
        labels: outcomes.into_iter().map(|values| OutcomeLabel::Field { values }).collect(),
        projections,
        context: format!("slopes ({})", parts.join(",")),
    })
}

fn spectrum_eigenbasis(mass: &Mass, system: &UnitarySystem) -> Result<ProjectionSystem> {
    let ops: Vec<OperatorMatrix> = mass.members().iter().map(|l| system.operator(l)).collect::<Result<_>>()?;
    let spaces = joint_eigenspaces(&ops, DEFAULT_TOL)?;
    if let Some(bad) = spaces.iter().find(|s| s.rank() != 1) {
        return Err(Error::DegenerateSpectrum(bad.rank()));
    }
    let d = system.d();
    let mut labels = Vec::with_capacity(spaces.len());
    let mut projections = Vec::with_capacity(spaces.len());
    for s in spaces {
        labels.push(OutcomeLabel::Spectrum { phases: s.eigenvalues.iter().map(|&z| phase_exponent(z, d)).collect() });
        projections.push(s.projection);
    }
    Ok(ProjectionSystem { labels, projections, context: mass.to_string() })
}

/// Mutually orthogonal projections `Q_t` summing to the identity.
#[derive(Clone, Debug)]
pub struct ConstraintFamily {
    blocks: Vec<OperatorMatrix>,
    /// Generator of the overlap subgroup and its eigenvalue on each block.
    generator: Option<(OpLabel, Vec<C64>)>,
}

impl ConstraintFamily {
    pub fn new(blocks: Vec<OperatorMatrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::NotResolution(f64::INFINITY));
        };
        let d = first.dim();
        let sys = ProjectionSystem { labels: Vec::new(), projections: blocks, context: String::new() };
        for b in &sys.projections {
            if b.dim() != d {
                return Err(Error::DimensionMismatch(b.dim(), d));
            }
        }
        let defect = sys.resolution_defect();
        if defect > PROJECTION_TOL {
            return Err(Error::NotResolution(defect));
        }
        Ok(Self { blocks: sys.projections, generator: None })
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    /// Number of blocks `τ`.
    pub fn tau(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[OperatorMatrix] {
        &self.blocks
    }

    pub fn block_ranks(&self) -> Vec<usize> {
        self.blocks.iter().map(OperatorMatrix::projection_rank).collect()
    }

    /// `T = {t : dim Q_t > 1}`.
    pub fn reducible_blocks(&self) -> Vec<usize> {
        self.block_ranks().into_iter().enumerate().filter(|&(_, r)| r > 1).map(|(t, _)| t).collect()
    }

    pub fn generator(&self) -> Option<&OpLabel> {
        self.generator.as_ref().map(|g| &g.0)
    }

    pub fn eigenvalues(&self) -> Option<&[C64]> {
        self.generator.as_ref().map(|g| g.1.as_slice())
    }
}

/// Order of a basis element modulo phases.
pub fn label_order(label: &OpLabel, system: &UnitarySystem) -> Result<u64> {
    match (label, system) {
        (OpLabel::Zd(p), UnitarySystem::Zd { d }) if p.d == *d => Ok(p.order()),
        (OpLabel::Gf(l), UnitarySystem::Gf(fields)) => {
            let mut order = 1;
            for e in l.entries() {
                let p = fields.field(e.factor).p();
                if order % p != 0 {
                    order *= p;
                }
            }
            Ok(order)
        }
        _ => Err(Error::Unsupported(format!("label {label} does not belong to this unitary system"))),
    }
}

/// Common operators of `masses` and a generator of the group they form with
/// the identity.
pub fn overlap_generator(masses: &[Mass], system: &UnitarySystem) -> Result<(BTreeSet<OpLabel>, OpLabel)> {
    let (first, rest) = masses.split_first().ok_or(Error::EmptyOverlap)?;
    let common: BTreeSet<OpLabel> =
        rest.iter().fold(first.members().clone(), |acc, m| acc.intersection(m.members()).cloned().collect());
    if common.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let size = common.len() as u64 + 1;
    for label in &common {
        if label_order(label, system)? == size {
            let generator = label.clone();
            return Ok((common, generator));
        }
    }
    Err(Error::NonCyclicOverlap(size as usize))
}

/// Eigenprojections of a generator of the (cyclic) overlap of `masses`.
pub fn constraint_from_overlap(masses: &[Mass], system: &UnitarySystem) -> Result<ConstraintFamily> {
    let (_, generator) = overlap_generator(masses, system)?;
    let u = system.operator(&generator)?;
    let spaces = joint_eigenspaces(std::slice::from_ref(&u), DEFAULT_TOL)?;
    let eigenvalues = spaces.iter().map(|s| s.eigenvalues[0]).collect();
    let mut family = ConstraintFamily::new(spaces.into_iter().map(|s| s.projection).collect())?;
    family.generator = Some((generator, eigenvalues));
    Ok(family)
}

/// Partition `{I_t}` of the outcomes with `Σ_{j ∈ I_t} P_j = Q_t`, if one exists.
pub fn is_q_constrained(p: &ElementaryMeasurement, q: &ConstraintFamily) -> Option<Vec<Vec<usize>>> {
    let d = p.dim();
    if q.dim() != d {
        return None;
    }
    let mut blocks = vec![Vec::new(); q.tau()];
    for (j, pj) in p.projections().iter().enumerate() {
        let t = q.blocks.iter().position(|qt| (trace_product(qt, pj).re - 1.0).abs() <= BLOCK_MATCH_TOL)?;
        blocks[t].push(j);
    }
    for (t, idx) in blocks.iter().enumerate() {
        let s = cmat::sum(d, idx.iter().map(|&j| &p.projections()[j]));
        if s.distance(&q.blocks[t]) > PROJECTION_TOL {
            return None;
        }
    }
    Some(blocks)
}

/// Measurements all constrained by one family, with their block partitions.
#[derive(Clone, Debug)]
pub struct ConstrainedClub {
    measurements: Vec<ElementaryMeasurement>,
    constraint: ConstraintFamily,
    /// `blocks[v][t] = I_t^v`.
    blocks: Vec<Vec<Vec<usize>>>,
}

impl ConstrainedClub {
    pub fn new(measurements: Vec<ElementaryMeasurement>, constraint: ConstraintFamily) -> Result<Self> {
        let blocks = measurements
            .iter()
            .enumerate()
            .map(|(v, m)| {
                is_q_constrained(m, &constraint)
                    .ok_or_else(|| Error::ReductionHypothesis(format!("measurement {v} is not Q-constrained")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { measurements, constraint, blocks })
    }

    /// Club of the measurements of `masses`, constrained by their overlap.
    pub fn from_masses(masses: &[Mass], system: &UnitarySystem) -> Result<Self> {
        let constraint = constraint_from_overlap(masses, system)?;
        let measurements = masses.iter().map(|m| measurement_from_mass(m, system)).collect::<Result<_>>()?;
        Self::new(measurements, constraint)
    }

    pub fn g(&self) -> usize {
        self.measurements.len()
    }

    pub fn measurements(&self) -> &[ElementaryMeasurement] {
        &self.measurements
    }

    pub fn constraint(&self) -> &ConstraintFamily {
        &self.constraint
    }

    pub fn block_assignment(&self) -> &[Vec<Vec<usize>>] {
        &self.blocks
    }
}

/// One dropped outcome and how to recover it from kept ones.
#[derive(Clone, Debug)]
pub struct DroppedProjection {
    pub v: usize,
    pub t: usize,
    pub j: usize,
    /// `(kept index, coefficient)`: `+1` on the first measurement's block, `−1` on `J_t^v`.
    pub recipe: Vec<(usize, f64)>,
    pub residual: f64,
}

/// A club after dropping one outcome per reducible block in each member but the first.
#[derive(Clone, Debug)]
pub struct ReducedDesign {
    pub kept: Vec<OperatorMatrix>,
    /// `(v, j)` of each kept projection.
    pub kept_index: Vec<(usize, usize)>,
    pub dropped: Vec<DroppedProjection>,
    pub completeness_rank: usize,
    pub g: usize,
    pub d: usize,
}

impl ReducedDesign {
    pub fn size(&self) -> usize {
        self.kept.len()
    }

    fn apply(&self, recipe: &[(usize, f64)]) -> OperatorMatrix {
        recipe.iter().fold(OperatorMatrix::zeros(self.d), |acc, &(i, c)| &acc + &self.kept[i].scale_real(c))
    }

    /// The dropped projections, rebuilt from their recipes.
    pub fn recovered_projections(&self) -> Vec<OperatorMatrix> {
        self.dropped.iter().map(|dp| self.apply(&dp.recipe)).collect()
    }

    /// Probabilities of all `g·d` outcomes (`[v][j]`) from those of the kept projections.
    pub fn recover_probabilities(&self, kept: &[f64]) -> Result<Vec<Vec<f64>>> {
        if kept.len() != self.kept.len() {
            return Err(Error::DimensionMismatch(kept.len(), self.kept.len()));
        }
        let mut full = vec![vec![f64::NAN; self.d]; self.g];
        for (&(v, j), &p) in self.kept_index.iter().zip(kept) {
            full[v][j] = p;
        }
        for dp in &self.dropped {
            full[dp.v][dp.j] = dp.recipe.iter().map(|&(i, c)| c * kept[i]).sum();
        }
        Ok(full)
    }
}

/// Replaces the club by the smaller family `P′`.
///
/// The first measurement is kept whole; for every later one and every block
/// of rank above one, the largest outcome index of the block is dropped.
pub fn reduce_club(club: &ConstrainedClub) -> Result<ReducedDesign> {
    let g = club.g();
    let tau = club.constraint.tau();
    if g < 2 {
        return Err(Error::ReductionHypothesis(format!("club of size {g}")));
    }
    if tau < 2 {
        return Err(Error::ReductionHypothesis("constraint has a single block".into()));
    }
    let reducible = club.constraint.reducible_blocks();
    if reducible.is_empty() {
        return Err(Error::ReductionHypothesis("no block of rank above one".into()));
    }
    let d = club.measurements[0].dim();

    let mut drops: BTreeSet<(usize, usize)> = BTreeSet::new();
    for v in 1..g {
        for &t in &reducible {
            let j = *club.blocks[v][t].iter().max().ok_or(Error::NotConstrained)?;
            drops.insert((v, j));
        }
    }
    let mut kept = Vec::new();
    let mut kept_index = Vec::new();
    let mut position = vec![vec![usize::MAX; d]; g];
    for (v, m) in club.measurements.iter().enumerate() {
        for (j, p) in m.projections().iter().enumerate() {
            if !drops.contains(&(v, j)) {
                position[v][j] = kept.len();
                kept.push(p.clone());
                kept_index.push((v, j));
            }
        }
    }

    let mut reduced = ReducedDesign { kept, kept_index, dropped: Vec::new(), completeness_rank: 0, g, d };
    for v in 1..g {
        for &t in &reducible {
            let block = &club.blocks[v][t];
            let j = *block.iter().max().expect("nonempty block");
            let mut recipe: Vec<(usize, f64)> = club.blocks[0][t].iter().map(|&i| (position[0][i], 1.0)).collect();
            recipe.extend(block.iter().filter(|&&i| i != j).map(|&i| (position[v][i], -1.0)));
            let target = &club.measurements[v].projections()[j];
            let via_q = block
                .iter()
                .filter(|&&i| i != j)
                .fold(club.constraint.blocks[t].clone(), |acc, &i| &acc - &club.measurements[v].projections()[i]);
            let residual = reduced.apply(&recipe).distance(target).max(via_q.distance(target));
            if residual > PROJECTION_TOL {
                return Err(Error::RecoveryResidual(residual));
            }
            reduced.dropped.push(DroppedProjection { v, t, j, recipe, residual });
        }
    }
    let mut span = reduced.kept.clone();
    span.push(OperatorMatrix::identity(d));
    reduced.completeness_rank = real_span_rank(&span, RANK_TOL)?;
    Ok(reduced)
}

/// `(complete, rank)` where rank is the real span dimension of `projs ∪ {I}`.
pub fn certify_complete(projs: &[OperatorMatrix], d: usize) -> Result<(bool, usize)> {
    let mut span: Vec<OperatorMatrix> = projs.to_vec();
    span.push(OperatorMatrix::identity(d));
    let rank = real_span_rank(&span, RANK_TOL)?;
    Ok((rank == d * d, rank))
}

/// `4 + (d − 2)·δ`, for `d = 2r` with `r ≥ 3` odd.
pub fn povm_size_bound(d: u64, delta: u64) -> Result<u64> {
    if d % 2 != 0 || (d / 2) % 2 == 0 || d < 6 {
        return Err(Error::InvalidModulus { d, reason: "bound needs d = 2r with r odd and r ≥ 3".into() });
    }
    Ok(4 + (d - 2) * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass_cover::{line_masses, mass_from_a_tuple, mass_from_line};
    use crate::phase_space::{enumerate_isotropic_lines, PhasePoint};
    use crate::weyl::{proj_p, zd_weyl};

    fn zd_mass_through(d: u64, p: (u64, u64)) -> Mass {
        let point = PhasePoint::new(p.0, p.1, d).unwrap();
        line_masses(d).unwrap().into_iter().find(|m| m.contains(&OpLabel::Zd(point))).unwrap()
    }

    #[test]
    fn measurement_examples() {
        let sys2 = UnitarySystem::zd(2).unwrap();
        let z = measurement_from_mass(&zd_mass_through(2, (0, 1)), &sys2).unwrap();
        let basis: Vec<OperatorMatrix> = (0..2)
            .map(|i| OperatorMatrix::diag(&[C64::new((i == 0) as u8 as f64, 0.0), C64::new((i == 1) as u8 as f64, 0.0)]))
            .collect();
        for b in &basis {
            assert!(z.projections().iter().any(|p| p.distance(b) < 1e-12));
        }

        // horizontal line at d = 3: eigenbasis of X is the Fourier basis
        let sys3 = UnitarySystem::zd(3).unwrap();
        let fx = measurement_from_mass(&zd_mass_through(3, (1, 0)), &sys3).unwrap();
        for p in fx.projections() {
            for i in 0..3 {
                assert!((p.get(i, i).re - 1.0 / 3.0).abs() < 1e-12);
            }
        }

        let fields = FieldFactors::new(6).unwrap();
        let sys6 = UnitarySystem::Gf(fields.clone());
        let a = [Slope::Finite(1), Slope::Finite(2)];
        let m = measurement_from_mass(&mass_from_a_tuple(&a, &fields).unwrap(), &sys6).unwrap();
        let expected = proj_p(fields.field(0), a[0], 1).unwrap().kron(&proj_p(fields.field(1), a[1], 2).unwrap());
        let k = m.labels().iter().position(|l| *l == OutcomeLabel::Field { values: vec![1, 2] }).unwrap();
        assert!(m.projections()[k].distance(&expected) < 1e-12);
    }

    #[test]
    fn measurements_of_every_line_and_slope_mass() {
        for d in [4u64, 6, 8, 9] {
            let sys = UnitarySystem::zd(d).unwrap();
            for mass in line_masses(d).unwrap() {
                let m = measurement_from_mass(&mass, &sys).unwrap();
                for (p, label) in m.projections().iter().zip(m.labels()) {
                    for op in mass.members() {
                        let u = sys.operator(op).unwrap();
                        let up = &u * p;
                        let lambda = trace_product(&u, p);
                        assert!(up.distance(&p.scale(lambda)) < 1e-9, "{label:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn generic_mass_gets_spectrum_labels() {
        let sys = UnitarySystem::zd(4).unwrap();
        let line = enumerate_isotropic_lines(4).unwrap().into_iter().find(|l| !l.is_cyclic()).unwrap();
        let mass = mass_from_line(&line).unwrap();
        let m = measurement_from_mass(&mass, &sys).unwrap();
        assert_eq!(m.projections().len(), 4);
        let cliques = crate::mass_cover::masses_by_cliques(&sys, 1e-10).unwrap();
        let clique = cliques.iter().find(|c| c.members() == mass.members()).unwrap();
        let mc = measurement_from_mass(clique, &sys).unwrap();
        assert!(matches!(mc.labels()[0], OutcomeLabel::Spectrum { .. }));
        for (a, b) in m.projections().iter().zip(mc.projections()) {
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn constraint_examples() {
        let sys4 = UnitarySystem::zd(4).unwrap();
        let through = |p: (u64, u64)| {
            let point = OpLabel::Zd(PhasePoint::new(p.0, p.1, 4).unwrap());
            line_masses(4).unwrap().into_iter().filter(move |m| m.contains(&point))
        };
        let pair: Vec<Mass> = through((2, 2)).filter(|m| matches!(m.source(), MassSource::Line(l) if l.is_cyclic())).collect();
        assert_eq!(pair.len(), 2);
        let q = constraint_from_overlap(&pair, &sys4).unwrap();
        assert_eq!(q.tau(), 2);
        assert_eq!(q.block_ranks(), vec![2, 2]);
        assert_eq!(q.generator(), Some(&OpLabel::Zd(PhasePoint::new(2, 2, 4).unwrap())));

        let sys5 = UnitarySystem::zd(5).unwrap();
        let lines5 = line_masses(5).unwrap();
        assert!(matches!(constraint_from_overlap(&lines5[..2], &sys5), Err(Error::EmptyOverlap)));

        let sys6 = UnitarySystem::zd(6).unwrap();
        let point = OpLabel::Zd(PhasePoint::new(3, 0, 6).unwrap());
        let two: Vec<Mass> = line_masses(6).unwrap().into_iter().filter(|m| m.contains(&point)).take(2).collect();
        let q6 = constraint_from_overlap(&two, &sys6).unwrap();
        assert_eq!(q6.block_ranks(), vec![3, 3]);
        for mass in &two {
            assert!(is_q_constrained(&measurement_from_mass(mass, &sys6).unwrap(), &q6).is_some());
        }
    }

    #[test]
    fn non_cyclic_overlap_is_reported() {
        // two slope tuples agreeing on the GF(4) factor of d = 12
        let fields = FieldFactors::new(12).unwrap();
        let sys = UnitarySystem::Gf(fields.clone());
        let a = mass_from_a_tuple(&[Slope::Finite(1), Slope::Finite(0)], &fields).unwrap();
        let b = mass_from_a_tuple(&[Slope::Finite(1), Slope::Finite(1)], &fields).unwrap();
        assert!(matches!(constraint_from_overlap(&[a, b], &sys), Err(Error::NonCyclicOverlap(4))));
        // the same situation on the cyclic side: two lines of Z_4² through the non-cyclic one's points
        let sys4 = UnitarySystem::zd(4).unwrap();
        let thick = enumerate_isotropic_lines(4).unwrap().into_iter().find(|l| !l.is_cyclic()).unwrap();
        let m = mass_from_line(&thick).unwrap();
        assert!(constraint_from_overlap(&[m.clone(), m], &sys4).is_err());
    }

    #[test]
    fn q_constrained_examples() {
        let sys = UnitarySystem::zd(2).unwrap();
        let z = measurement_from_mass(&zd_mass_through(2, (0, 1)), &sys).unwrap();
        let x = measurement_from_mass(&zd_mass_through(2, (1, 0)), &sys).unwrap();
        let trivial = ConstraintFamily::new(vec![OperatorMatrix::identity(2)]).unwrap();
        assert_eq!(is_q_constrained(&x, &trivial), Some(vec![vec![0, 1]]));
        let own = ConstraintFamily::new(z.projections().to_vec()).unwrap();
        assert_eq!(is_q_constrained(&z, &own), Some(vec![vec![0], vec![1]]));
        for (qt, pj) in own.blocks().iter().zip(x.projections()) {
            assert!((trace_product(qt, pj).re - 0.5).abs() < 1e-12);
        }
        assert_eq!(is_q_constrained(&x, &own), None);
        assert!(ConstraintFamily::new(vec![OperatorMatrix::identity(2), OperatorMatrix::identity(2)]).is_err());
    }

    fn club_through(d: u64, p: (u64, u64), g: usize) -> ConstrainedClub {
        let sys = UnitarySystem::zd(d).unwrap();
        let point = OpLabel::Zd(PhasePoint::new(p.0, p.1, d).unwrap());
        let masses: Vec<Mass> = line_masses(d)
            .unwrap()
            .into_iter()
            .filter(|m| m.contains(&point) && matches!(m.source(), MassSource::Line(l) if l.is_cyclic()))
            .take(g)
            .collect();
        assert_eq!(masses.len(), g);
        ConstrainedClub::from_masses(&masses, &sys).unwrap()
    }

    #[test]
    fn reduction_counts_and_recovery() {
        for (d, p, g) in [(4u64, (2u64, 2u64), 2usize), (6, (2, 0), 3), (6, (3, 3), 4), (8, (4, 0), 2), (8, (2, 2), 2)] {
            let club = club_through(d, p, g);
            let t = club.constraint().reducible_blocks().len();
            let reduced = reduce_club(&club).unwrap();
            assert_eq!(reduced.size(), g * d as usize - (g - 1) * t, "d = {d}");
            assert!(reduced.size() < g * d as usize);
            for (dp, rec) in reduced.dropped.iter().zip(reduced.recovered_projections()) {
                assert!(rec.distance(&club.measurements()[dp.v].projections()[dp.j]) <= 1e-10);
            }
            let all: Vec<OperatorMatrix> =
                club.measurements().iter().flat_map(|m| m.projections().iter().cloned()).collect();
            let (_, full_rank) = certify_complete(&all, d as usize).unwrap();
            assert_eq!(reduced.completeness_rank, full_rank);
        }
        let club = club_through(4, (2, 2), 2);
        assert_eq!(reduce_club(&club).unwrap().size(), 6);
    }

    #[test]
    fn reduction_refuses_without_hypotheses() {
        let club = club_through(4, (2, 2), 2);
        let single = ConstrainedClub::new(club.measurements()[..1].to_vec(), club.constraint().clone()).unwrap();
        assert!(matches!(reduce_club(&single), Err(Error::ReductionHypothesis(_))));
        // a constraint whose blocks are all one-dimensional: T = ∅
        let own = ConstraintFamily::new(club.measurements()[0].projections().to_vec()).unwrap();
        let same = ConstrainedClub::new(vec![club.measurements()[0].clone(), club.measurements()[0].clone()], own).unwrap();
        assert!(matches!(reduce_club(&same), Err(Error::ReductionHypothesis(_))));
        let whole = ConstraintFamily::new(vec![OperatorMatrix::identity(4)]).unwrap();
        let coarse = ConstrainedClub::new(club.measurements().to_vec(), whole).unwrap();
        assert!(matches!(reduce_club(&coarse), Err(Error::ReductionHypothesis(_))));
        let sys = UnitarySystem::zd(2).unwrap();
        let z = measurement_from_mass(&zd_mass_through(2, (0, 1)), &sys).unwrap();
        let x = measurement_from_mass(&zd_mass_through(2, (1, 0)), &sys).unwrap();
        let zq = ConstraintFamily::new(z.projections().to_vec()).unwrap();
        assert!(ConstrainedClub::new(vec![z, x], zq).is_err());
    }

    #[test]
    fn certify_examples() {
        let sys = UnitarySystem::zd(3).unwrap();
        let all: Vec<OperatorMatrix> = line_masses(3)
            .unwrap()
            .iter()
            .flat_map(|m| measurement_from_mass(m, &sys).unwrap().projections().to_vec())
            .collect();
        assert_eq!(all.len(), 12);
        assert_eq!(certify_complete(&all, 3).unwrap(), (true, 9));
        assert_eq!(certify_complete(&all[..3], 3).unwrap(), (false, 3));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(povm_size_bound(6, 12).unwrap(), 52);
        assert_eq!(povm_size_bound(10, 18).unwrap(), 148);
        for d in [2u64, 4, 8, 9] {
            assert!(povm_size_bound(d, 1).is_err());
        }
    }

    #[test]
    fn overlap_generator_orders() {
        let sys = UnitarySystem::zd(6).unwrap();
        let u = zd_weyl(&PhasePoint::new(2, 0, 6).unwrap());
        let club = club_through(6, (2, 0), 3);
        let q = club.constraint();
        assert_eq!(q.tau(), 3);
        for (block, &lambda) in q.blocks().iter().zip(q.eigenvalues().unwrap()) {
            assert!((&u * block).distance(&block.scale(lambda)) < 1e-10);
        }
        assert_eq!(label_order(q.generator().unwrap(), &sys).unwrap(), 3);
    }
}
