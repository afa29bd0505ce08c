//! The discrete phase space `X = Z_d²` with its symplectic form
//! `w(σ, σ') = m n' − m' n (mod d)`, subgroups, orthogonals and the
//! Lagrangian submodules (isotropic lines).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zmod::{factorize, gcd3_zero_as_d};

/// Default upper bound on `d` for line enumeration.
pub const MAX_LINE_MODULUS: u64 = 36;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhasePoint {
    pub m: u64,
    pub n: u64,
    pub d: u64,
}

impl PhasePoint {
    pub fn new(m: u64, n: u64, d: u64) -> Result<Self> {
        if d == 0 || m >= d || n >= d {
            return Err(Error::OutOfRange(format!("({m}, {n}) not in Z_{d}²")));
        }
        Ok(Self { m, n, d })
    }

    pub fn origin(d: u64) -> Self {
        Self { m: 0, n: 0, d }
    }

    pub fn is_origin(&self) -> bool {
        self.m == 0 && self.n == 0
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: (self.m + other.m) % self.d, n: (self.n + other.n) % self.d, d: self.d }
    }

    pub fn neg(&self) -> Self {
        Self { m: (self.d - self.m) % self.d, n: (self.d - self.n) % self.d, d: self.d }
    }

    pub fn scale(&self, t: u64) -> Self {
        Self { m: (self.m * (t % self.d)) % self.d, n: (self.n * (t % self.d)) % self.d, d: self.d }
    }

    /// `h = gcd(m, n, d)` with zero read as `d`.
    pub fn index(&self) -> u64 {
        gcd3_zero_as_d(self.m, self.n, self.d).expect("point in range")
    }

    /// Additive order `d / h`.
    pub fn order(&self) -> u64 {
        self.d / self.index()
    }

    pub fn coords(&self) -> [u64; 2] {
        [self.m, self.n]
    }
}

impl fmt::Display for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// `w(σ, σ') = m n' − m' n (mod d)`.
pub fn symplectic(a: &PhasePoint, b: &PhasePoint) -> Result<u64> {
    if a.d != b.d {
        return Err(Error::ModulusMismatch(a.d, b.d));
    }
    Ok(symplectic_unchecked(a, b))
}

pub(crate) fn symplectic_unchecked(a: &PhasePoint, b: &PhasePoint) -> u64 {
    let d = a.d as u128;
    let lhs = (a.m as u128 * b.n as u128) % d;
    let rhs = (b.m as u128 * a.n as u128) % d;
    ((lhs + d - rhs) % d) as u64
}

pub fn all_points(d: u64) -> impl Iterator<Item = PhasePoint> {
    (0..d).flat_map(move |m| (0..d).map(move |n| PhasePoint { m, n, d }))
}

/// A subgroup of `Z_d²`, stored as its sorted point set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subgroup {
    d: u64,
    points: Vec<PhasePoint>,
}

impl Subgroup {
    /// Checks closure under addition (finite, so closure implies a subgroup).
    pub fn from_points(d: u64, points: impl IntoIterator<Item = PhasePoint>) -> Result<Self> {
        let set: BTreeSet<PhasePoint> = points.into_iter().collect();
        if let Some(bad) = set.iter().find(|p| p.d != d) {
            return Err(Error::ModulusMismatch(d, bad.d));
        }
        if !set.contains(&PhasePoint::origin(d)) {
            return Err(Error::NotSubgroup("origin missing".into()));
        }
        for a in &set {
            for b in &set {
                if !set.contains(&a.add(b)) {
                    return Err(Error::NotSubgroup(format!("{a} + {b} not in set")));
                }
            }
        }
        Ok(Self { d, points: set.into_iter().collect() })
    }

    pub fn generated_by(d: u64, gens: &[PhasePoint]) -> Self {
        let mut set = BTreeSet::from([PhasePoint::origin(d)]);
        let mut frontier = vec![PhasePoint::origin(d)];
        while let Some(p) = frontier.pop() {
            for g in gens {
                let q = p.add(g);
                if set.insert(q) {
                    frontier.push(q);
                }
            }
        }
        Self { d, points: set.into_iter().collect() }
    }

    pub fn trivial(d: u64) -> Self {
        Self { d, points: vec![PhasePoint::origin(d)] }
    }

    pub fn whole(d: u64) -> Self {
        Self { d, points: all_points(d).collect() }
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        self.points.binary_search(p).is_ok()
    }

    pub fn is_subset(&self, other: &Subgroup) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn intersection(&self, other: &Subgroup) -> Subgroup {
        Subgroup {
            d: self.d,
            points: self.points.iter().filter(|p| other.contains(p)).copied().collect(),
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.points
            .iter()
            .all(|a| self.points.iter().all(|b| symplectic_unchecked(a, b) == 0))
    }

    /// The smallest point generating the whole subgroup, if it is cyclic.
    pub fn cyclic_generator(&self) -> Option<PhasePoint> {
        let size = self.points.len() as u64;
        self.points.iter().copied().find(|p| p.order() == size)
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic_generator().is_some()
    }

    /// Lexicographically smallest minimal generating set (one or two points).
    pub fn minimal_generators(&self) -> Vec<PhasePoint> {
        if self.points.len() == 1 {
            return Vec::new();
        }
        if let Some(g) = self.cyclic_generator() {
            return vec![g];
        }
        for (i, a) in self.points.iter().enumerate() {
            if a.is_origin() {
                continue;
            }
            for b in &self.points[i + 1..] {
                if a.order() * b.order() < self.points.len() as u64 {
                    continue;
                }
                if Subgroup::generated_by(self.d, &[*a, *b]).len() == self.points.len() {
                    return vec![*a, *b];
                }
            }
        }
        unreachable!("subgroups of Z_d² are generated by two elements")
    }
}

/// `M^w`, by exhaustive scan of `X`.
pub fn orthogonal(m: &Subgroup) -> Result<Subgroup> {
    // closure is part of the contract; recheck for subgroups built by hand
    let checked = Subgroup::from_points(m.d, m.points.iter().copied())?;
    let d = checked.d;
    Ok(Subgroup {
        d,
        points: all_points(d)
            .filter(|s| checked.points.iter().all(|t| symplectic_unchecked(s, t) == 0))
            .collect(),
    })
}

/// The cyclic subgroup `λ_σ = {tσ}`.
pub fn subgroup_generated(sigma: &PhasePoint) -> Subgroup {
    Subgroup::generated_by(sigma.d, &[*sigma])
}

/// A Lagrangian submodule `λ = λ^w` of `Z_d²` (equivalently an isotropic line).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IsotropicLine {
    group: Subgroup,
    generators: Vec<PhasePoint>,
}

impl IsotropicLine {
    pub fn new(group: Subgroup) -> Result<Self> {
        let d = group.d();
        if group.len() as u64 != d || orthogonal(&group)? != group {
            return Err(Error::NotLagrangian(format!(
                "subgroup of order {} in Z_{d}² is not its own orthogonal",
                group.len()
            )));
        }
        let generators = group.minimal_generators();
        Ok(Self { group, generators })
    }

    // caller guarantees |group| = d and isotropy
    fn new_unchecked(group: Subgroup) -> Self {
        let generators = group.minimal_generators();
        Self { group, generators }
    }

    pub fn d(&self) -> u64 {
        self.group.d()
    }

    pub fn points(&self) -> &[PhasePoint] {
        self.group.points()
    }

    pub fn group(&self) -> &Subgroup {
        &self.group
    }

    pub fn generators(&self) -> &[PhasePoint] {
        &self.generators
    }

    pub fn is_cyclic(&self) -> bool {
        self.generators.len() == 1
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        self.group.contains(p)
    }

    /// Whether the line meets the vertical axis `{(0, l)}` only at the origin,
    /// which makes its `d` vertical translates pairwise distinct.
    pub fn has_faithful_shifts(&self) -> bool {
        self.points().iter().all(|p| p.m != 0 || p.n == 0)
    }
}

impl fmt::Display for IsotropicLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators.iter().map(ToString::to_string).collect();
        write!(f, "⟨{}⟩", gens.join(", "))
    }
}

/// All Lagrangian submodules of `Z_d²`, sorted by point list.
///
/// Cyclic lines are `⟨σ⟩` for the points with `h = 1`. A non-cyclic line has
/// no point with `h = 1`, so the remaining lines are found among subgroups
/// generated by orthogonal pairs of such points.
pub fn enumerate_isotropic_lines(d: u64) -> Result<Vec<IsotropicLine>> {
    enumerate_isotropic_lines_bounded(d, MAX_LINE_MODULUS)
}

pub fn enumerate_isotropic_lines_bounded(d: u64, bound: u64) -> Result<Vec<IsotropicLine>> {
    if d < 2 || d > bound {
        return Err(Error::InvalidModulus { d, reason: format!("line enumeration needs 2 ≤ d ≤ {bound}") });
    }
    let mut found: BTreeSet<Subgroup> = BTreeSet::new();
    let mut thick = Vec::new();
    for p in all_points(d) {
        if p.is_origin() {
            continue;
        }
        if p.index() == 1 {
            found.insert(subgroup_generated(&p));
        } else {
            thick.push(p);
        }
    }
    for (i, a) in thick.iter().enumerate() {
        let ca = subgroup_generated(a);
        for b in &thick[i + 1..] {
            if symplectic_unchecked(a, b) != 0 || ca.contains(b) {
                continue;
            }
            if a.order() * b.order() < d {
                continue;
            }
            let g = Subgroup::generated_by(d, &[*a, *b]);
            if g.len() as u64 == d {
                found.insert(g);
            }
        }
    }
    let lines: Vec<IsotropicLine> = found.into_iter().map(IsotropicLine::new_unchecked).collect();
    debug_assert_eq!(lines.len() as u64, factorize(d)?.lagrangian_count());
    Ok(lines)
}

/// Lines (from `lines`) that contain `σ`.
pub fn lines_through<'a>(lines: &'a [IsotropicLine], sigma: &PhasePoint) -> Result<Vec<&'a IsotropicLine>> {
    if sigma.is_origin() {
        return Err(Error::OriginPoint);
    }
    Ok(lines.iter().filter(|l| l.contains(sigma)).collect())
}

/// A vertical translate `(λ, i) = {σ + (0, i) : σ ∈ λ}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftedLine {
    pub line: IsotropicLine,
    pub shift: u64,
    points: Vec<PhasePoint>,
}

impl ShiftedLine {
    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn d(&self) -> u64 {
        self.line.d()
    }
}

pub fn shift_line(line: &IsotropicLine, shift: u64) -> Result<ShiftedLine> {
    let d = line.d();
    if shift >= d {
        return Err(Error::OutOfRange(format!("shift {shift} not in Z_{d}")));
    }
    let offset = PhasePoint { m: 0, n: shift, d };
    let mut points: Vec<PhasePoint> = line.points().iter().map(|p| p.add(&offset)).collect();
    points.sort();
    Ok(ShiftedLine { line: line.clone(), shift, points })
}

pub fn intersection_count(a: &ShiftedLine, b: &ShiftedLine) -> Result<usize> {
    if a.d() != b.d() {
        return Err(Error::ModulusMismatch(a.d(), b.d()));
    }
    Ok(a.points.iter().filter(|p| b.points.binary_search(p).is_ok()).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(m: u64, n: u64, d: u64) -> PhasePoint {
        PhasePoint::new(m, n, d).unwrap()
    }

    #[test]
    fn symplectic_examples() {
        for d in 2..8 {
            assert_eq!(symplectic(&pt(1, 0, d), &pt(0, 1, d)).unwrap(), 1);
            let s = pt(1, d - 1, d);
            assert_eq!(symplectic(&s, &s).unwrap(), 0);
        }
        assert_eq!(symplectic(&pt(2, 3, 6), &pt(4, 1, 6)).unwrap(), 2);
        assert!(matches!(symplectic(&pt(1, 0, 2), &pt(1, 0, 3)), Err(Error::ModulusMismatch(2, 3))));
    }

    #[test]
    fn symplectic_antisymmetric() {
        for d in 2..7 {
            for a in all_points(d) {
                for b in all_points(d) {
                    let s = symplectic(&a, &b).unwrap() + symplectic(&b, &a).unwrap();
                    assert_eq!(s % d, 0);
                }
            }
        }
    }

    #[test]
    fn orthogonal_examples() {
        assert_eq!(orthogonal(&Subgroup::trivial(3)).unwrap(), Subgroup::whole(3));
        let m2 = Subgroup::from_points(2, [pt(0, 0, 2), pt(1, 0, 2)]).unwrap();
        assert_eq!(orthogonal(&m2).unwrap(), m2);
        let m4 = Subgroup::from_points(4, [pt(0, 0, 4), pt(2, 0, 4), pt(0, 2, 4), pt(2, 2, 4)]).unwrap();
        assert_eq!(orthogonal(&m4).unwrap(), m4);
        assert!(!m4.is_cyclic());
        assert!(Subgroup::from_points(4, [pt(0, 0, 4), pt(1, 0, 4)]).is_err());
    }

    #[test]
    fn generated_subgroups() {
        assert_eq!(subgroup_generated(&pt(0, 0, 6)).len(), 1);
        let g = subgroup_generated(&pt(2, 4, 6));
        assert_eq!(g.points(), &[pt(0, 0, 6), pt(2, 4, 6), pt(4, 2, 6)]);
        assert_eq!(subgroup_generated(&pt(1, 5, 6)).len(), 6);
        for d in 2..13 {
            for p in all_points(d) {
                assert_eq!(subgroup_generated(&p).len() as u64, d / p.index());
            }
        }
    }

    #[test]
    fn line_counts_and_lagrangian() {
        for d in 2..=12u64 {
            let lines = enumerate_isotropic_lines(d).unwrap();
            assert_eq!(lines.len() as u64, factorize(d).unwrap().lagrangian_count(), "d = {d}");
            for l in &lines {
                assert_eq!(&orthogonal(l.group()).unwrap(), l.group());
            }
            assert!(lines.windows(2).all(|w| w[0].points() < w[1].points()));
        }
        let four = enumerate_isotropic_lines(4).unwrap();
        assert_eq!(four.iter().filter(|l| !l.is_cyclic()).count(), 1);
        assert!(enumerate_isotropic_lines(1).is_err());
        assert!(enumerate_isotropic_lines(37).is_err());
    }

    #[test]
    fn lines_cover_phase_space() {
        for d in 2..=10u64 {
            let lines = enumerate_isotropic_lines(d).unwrap();
            for p in all_points(d).filter(|p| !p.is_origin()) {
                let through = lines_through(&lines, &p).unwrap();
                assert!(!through.is_empty());
                if p.index() == 1 {
                    assert_eq!(through.len(), 1);
                    assert_eq!(through[0].group(), &subgroup_generated(&p));
                } else {
                    assert!(through.len() >= 2, "d={d} {p}");
                    let small = subgroup_generated(&p);
                    assert!(through.iter().all(|l| small.is_subset(l.group())));
                }
            }
        }
    }

    #[test]
    fn lines_through_examples() {
        let six = enumerate_isotropic_lines(6).unwrap();
        assert_eq!(lines_through(&six, &pt(1, 1, 6)).unwrap().len(), 1);
        let four = enumerate_isotropic_lines(4).unwrap();
        let through = lines_through(&four, &pt(2, 2, 4)).unwrap();
        assert!(through.len() >= 2);
        assert!(through.iter().all(|l| l.contains(&pt(2, 2, 4))));
        let five = enumerate_isotropic_lines(5).unwrap();
        assert_eq!(lines_through(&five, &pt(3, 1, 5)).unwrap().len(), 1);
        assert!(matches!(lines_through(&five, &pt(0, 0, 5)), Err(Error::OriginPoint)));
    }

    #[test]
    fn shifts() {
        let two = enumerate_isotropic_lines(2).unwrap();
        let horizontal = two.iter().find(|l| l.contains(&pt(1, 0, 2))).unwrap();
        assert_eq!(shift_line(horizontal, 0).unwrap().points(), horizontal.points());
        assert_eq!(shift_line(horizontal, 1).unwrap().points(), &[pt(0, 1, 2), pt(1, 1, 2)]);
        let vertical = two.iter().find(|l| l.contains(&pt(0, 1, 2))).unwrap();
        assert_eq!(shift_line(vertical, 1).unwrap().points(), vertical.points());
        assert!(!vertical.has_faithful_shifts());
        assert!(shift_line(vertical, 2).is_err());
    }

    #[test]
    fn shifts_cover_phase_space_uniformly() {
        for d in 2..=8u64 {
            for l in enumerate_isotropic_lines(d).unwrap() {
                let vertical = l.points().iter().filter(|p| p.m == 0).count();
                let mut counts = std::collections::BTreeMap::new();
                for i in 0..d {
                    for p in shift_line(&l, i).unwrap().points() {
                        *counts.entry(*p).or_insert(0) += 1;
                    }
                }
                assert_eq!(counts.len(), (d * d) as usize / vertical);
                assert!(counts.values().all(|&c| c == vertical));
                assert_eq!(counts.len() as u64 == d * d, l.has_faithful_shifts());
            }
        }
    }

    #[test]
    fn intersections() {
        let three = enumerate_isotropic_lines(3).unwrap();
        for a in &three {
            let sa = shift_line(a, 0).unwrap();
            assert_eq!(intersection_count(&sa, &sa).unwrap(), 3);
            for b in &three {
                if a != b {
                    assert_eq!(intersection_count(&sa, &shift_line(b, 0).unwrap()).unwrap(), 1);
                }
            }
        }
        let four = enumerate_isotropic_lines(4).unwrap();
        let diag = four.iter().find(|l| l.contains(&pt(1, 1, 4))).unwrap();
        let thick = four.iter().find(|l| !l.is_cyclic()).unwrap();
        let n = intersection_count(&shift_line(diag, 0).unwrap(), &shift_line(thick, 0).unwrap()).unwrap();
        // {(0,0),(2,2)}
        assert_eq!(n, 2);
    }

    #[test]
    fn generators_are_minimal() {
        for d in [4u64, 8, 9, 12] {
            for l in enumerate_isotropic_lines(d).unwrap() {
                let g = Subgroup::generated_by(d, l.generators());
                assert_eq!(&g, l.group());
                assert!(!l.generators().is_empty() && l.generators().len() <= 2);
            }
        }
    }
}
