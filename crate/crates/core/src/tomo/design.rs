use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    certify_complete, measurement_from_mass, overlap_generator, povm_size_bound, reconstruct_linear, reduce_club,
    simulate_probabilities, ConstrainedClub, DensityMatrix, ElementaryMeasurement, ReducedDesign,
};
use crate::cmat::OperatorMatrix;
use crate::error::{Error, Result};
use crate::mass_cover::{system_cover, Mass, MassCover, UnitarySystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Zd,
    Gf,
}

impl Basis {
    pub fn system(self, d: u64) -> Result<UnitarySystem> {
        match self {
            Basis::Zd => UnitarySystem::zd(d),
            Basis::Gf => UnitarySystem::gf(d),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Zd => "zd",
            Basis::Gf => "gf",
        })
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zd" => Ok(Basis::Zd),
            "gf" => Ok(Basis::Gf),
            other => Err(Error::Unsupported(format!("unknown basis '{other}'"))),
        }
    }
}

/// Cover masses grouped around a shared cyclic subgroup, with its reduction.
#[derive(Clone, Debug)]
pub struct Club {
    /// Indices into the design's measurements, ascending; the first is kept whole.
    pub members: Vec<usize>,
    pub club: ConstrainedClub,
    pub reduced: ReducedDesign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeptOutcome {
    pub measurement: usize,
    pub outcome: usize,
}

#[derive(Clone, Debug)]
pub struct DroppedOutcome {
    pub club: usize,
    pub v: usize,
    pub t: usize,
    pub measurement: usize,
    pub outcome: usize,
    /// `(index into kept, coefficient)`.
    pub recipe: Vec<(usize, f64)>,
    pub residual: f64,
}

/// Measurements from a minimal MASS cover, optionally reduced club by club.
#[derive(Clone, Debug)]
pub struct Design {
    pub basis: Basis,
    pub system: UnitarySystem,
    pub cover: MassCover,
    pub measurements: Vec<ElementaryMeasurement>,
    pub clubs: Vec<Club>,
    pub kept: Vec<KeptOutcome>,
    pub dropped: Vec<DroppedOutcome>,
    pub rank: usize,
    pub complete: bool,
}

/// Gain `(g − 1)·|T|` of reducing the club `members`, if their overlap is cyclic.
fn club_gain(masses: &[Mass], members: &[usize], system: &UnitarySystem) -> Option<u64> {
    let group: Vec<Mass> = members.iter().map(|&i| masses[i].clone()).collect();
    let (common, _) = overlap_generator(&group, system).ok()?;
    let order = common.len() as u64 + 1;
    // blocks have rank d/order; all are reducible exactly when order < d
    (order < system.d()).then(|| (members.len() as u64 - 1) * order)
}

/// Disjoint clubs among `masses`, chosen greedily.
///
/// Candidates are the unused masses through a common basis element. The
/// club with the best gain per member is taken first, then the larger gain,
/// then the earliest candidate.
pub fn select_clubs(masses: &[Mass], system: &UnitarySystem) -> Vec<Vec<usize>> {
    let labels = system.labels();
    let mut used = vec![false; masses.len()];
    let mut clubs = Vec::new();
    loop {
        let mut best: Option<(Vec<usize>, u64)> = None;
        let mut seen = BTreeSet::new();
        for label in &labels {
            let members: Vec<usize> = (0..masses.len()).filter(|&i| !used[i] && masses[i].contains(label)).collect();
            if members.len() < 2 || !seen.insert(members.clone()) {
                continue;
            }
            let Some(gain) = club_gain(masses, &members, system) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((b, bg)) => {
                    let lhs = gain as u128 * b.len() as u128;
                    let rhs = *bg as u128 * members.len() as u128;
                    lhs > rhs || (lhs == rhs && gain > *bg)
                }
            };
            if better {
                best = Some((members, gain));
            }
        }
        match best {
            Some((members, _)) => {
                for &i in &members {
                    used[i] = true;
                }
                clubs.push(members);
            }
            None => break,
        }
    }
    clubs.sort();
    clubs
}

impl Design {
    pub fn build(d: u64, basis: Basis, reduce: bool) -> Result<Self> {
        let system = basis.system(d)?;
        let cover = system_cover(&system)?;
        let measurements: Vec<ElementaryMeasurement> =
            cover.masses.iter().map(|m| measurement_from_mass(m, &system)).collect::<Result<_>>()?;
        let n = d as usize;

        let mut clubs = Vec::new();
        if reduce {
            for members in select_clubs(&cover.masses, &system) {
                let masses: Vec<Mass> = members.iter().map(|&i| cover.masses[i].clone()).collect();
                let constraint = super::constraint_from_overlap(&masses, &system)?;
                let club = ConstrainedClub::new(members.iter().map(|&i| measurements[i].clone()).collect(), constraint)?;
                let reduced = reduce_club(&club)?;
                clubs.push(Club { members, club, reduced });
            }
        }

        // (measurement, outcome) -> (club, kept index within club) for measurements in clubs
        let mut club_of: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (c, club) in clubs.iter().enumerate() {
            for (v, &m) in club.members.iter().enumerate() {
                club_of.insert(m, (c, v));
            }
        }
        let mut kept = Vec::new();
        let mut global: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
        for m in 0..measurements.len() {
            match club_of.get(&m) {
                Some(&(c, v)) => {
                    for (local, &(kv, j)) in clubs[c].reduced.kept_index.iter().enumerate() {
                        if kv == v {
                            global.insert((c, local, 0), kept.len());
                            kept.push(KeptOutcome { measurement: m, outcome: j });
                        }
                    }
                }
                None => kept.extend((0..n).map(|j| KeptOutcome { measurement: m, outcome: j })),
            }
        }
        let mut dropped = Vec::new();
        for (c, club) in clubs.iter().enumerate() {
            for dp in &club.reduced.dropped {
                dropped.push(DroppedOutcome {
                    club: c,
                    v: dp.v,
                    t: dp.t,
                    measurement: club.members[dp.v],
                    outcome: dp.j,
                    recipe: dp.recipe.iter().map(|&(i, coef)| (global[&(c, i, 0)], coef)).collect(),
                    residual: dp.residual,
                });
            }
        }

        let mut design =
            Design { basis, system, cover, measurements, clubs, kept, dropped, rank: 0, complete: false };
        let projs: Vec<OperatorMatrix> = design.kept_projections().into_iter().cloned().collect();
        let (complete, rank) = certify_complete(&projs, n)?;
        design.rank = rank;
        design.complete = complete;
        Ok(design)
    }

    pub fn d(&self) -> u64 {
        self.system.d()
    }

    /// Size `δ` of the MASS cover.
    pub fn delta(&self) -> usize {
        self.cover.delta()
    }

    /// Number of kept rank-one projections.
    pub fn size(&self) -> usize {
        self.kept.len()
    }

    pub fn unreduced_size(&self) -> usize {
        self.delta() * self.d() as usize
    }

    /// `(d − 1)·δ`: basis elements needed to cover the unitary system.
    pub fn basis_element_count(&self) -> usize {
        (self.d() as usize - 1) * self.delta()
    }

    pub fn bound(&self) -> Option<u64> {
        povm_size_bound(self.d(), self.delta() as u64).ok()
    }

    pub fn kept_projections(&self) -> Vec<&OperatorMatrix> {
        self.kept.iter().map(|k| &self.measurements[k.measurement].projections()[k.outcome]).collect()
    }

    /// Every outcome of every measurement, measurement-major.
    pub fn all_projections(&self) -> Vec<&OperatorMatrix> {
        self.measurements.iter().flat_map(|m| m.projections()).collect()
    }

    /// Probabilities of the kept projections.
    pub fn simulate(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        let projs: Vec<OperatorMatrix> = self.kept_projections().into_iter().cloned().collect();
        simulate_probabilities(rho, &projs)
    }

    /// Probabilities of all outcomes (measurement-major), dropped ones recovered.
    pub fn expand_probabilities(&self, kept: &[f64]) -> Result<Vec<f64>> {
        if kept.len() != self.kept.len() {
            return Err(Error::DimensionMismatch(kept.len(), self.kept.len()));
        }
        let n = self.d() as usize;
        let mut full = vec![f64::NAN; self.measurements.len() * n];
        for (k, &p) in self.kept.iter().zip(kept) {
            full[k.measurement * n + k.outcome] = p;
        }
        for dp in &self.dropped {
            full[dp.measurement * n + dp.outcome] = dp.recipe.iter().map(|&(i, c)| c * kept[i]).sum();
        }
        Ok(full)
    }

    /// Linear reconstruction from kept probabilities.
    pub fn reconstruct(&self, kept: &[f64]) -> Result<DensityMatrix> {
        let projs: Vec<OperatorMatrix> = self.kept_projections().into_iter().cloned().collect();
        reconstruct_linear(kept, &projs, self.d() as usize)
    }
}
