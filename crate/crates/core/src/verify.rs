//! Runtime invariant suites, one per module, stopping at the first violation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::cmat::{hs_inner, trace_product, OperatorMatrix, C64};
use crate::error::{Error, Result};
use crate::gfq::FieldTable;
use crate::mass_cover::{structured_masses, system_cover, verify_mass, OpLabel};
use crate::phase_space::{enumerate_isotropic_lines, intersection_count, shift_line, symplectic};
use crate::tomo::{
    ie_probabilities, reconstruct_inclusion_exclusion, seeded_density, Basis, Design, IeConvention,
};
use crate::weyl::{gf_weyl, line_eigenbasis, proj_p, unitary_basis_f, zd_weyl, FieldFactors, OutcomeLabel, ShiftReference, Slope};
use crate::zmod::{factorize, gcd};

/// Dimensions checked when none is given.
pub const DEFAULT_DIMENSIONS: [u64; 5] = [2, 3, 4, 5, 6];

/// Tolerance for exact operator identities.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Zmod,
    Gfq,
    PhaseSpace,
    Weyl,
    MassCover,
    Tomo,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Zmod, Suite::Gfq, Suite::PhaseSpace, Suite::Weyl, Suite::MassCover, Suite::Tomo];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Zmod => "zmod",
            Suite::Gfq => "gfq",
            Suite::PhaseSpace => "phase_space",
            Suite::Weyl => "weyl",
            Suite::MassCover => "mass_cover",
            Suite::Tomo => "tomo",
        }
    }

    /// `"all"` or a single suite name.
    pub fn parse_selection(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            Ok(Suite::ALL.to_vec())
        } else {
            Ok(vec![s.parse()?])
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub d: u64,
    pub passed: bool,
    pub detail: String,
}

struct Recorder<'a> {
    out: &'a mut Vec<Check>,
    suite: Suite,
    d: u64,
}

impl Recorder<'_> {
    /// Records a check; returns whether to keep going.
    fn record(&mut self, name: &str, passed: bool, detail: String) -> bool {
        self.out.push(Check { suite: self.suite, name: name.to_string(), d: self.d, passed, detail });
        passed
    }

    fn within(&mut self, name: &str, value: f64, tol: f64) -> bool {
        self.record(name, value <= tol, format!("{value:e} (tolerance {tol:e})"))
    }
}

/// Runs `suites` over `dims`; the returned list ends at the first failed check.
pub fn run_suites(suites: &[Suite], dims: &[u64], tol: f64, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &suite in suites {
        for &d in dims {
            let mut rec = Recorder { out: &mut out, suite, d };
            let ok = match suite {
                Suite::Zmod => zmod_checks(&mut rec, d)?,
                Suite::Gfq => gfq_checks(&mut rec, d)?,
                Suite::PhaseSpace => phase_space_checks(&mut rec, d)?,
                Suite::Weyl => weyl_checks(&mut rec, d)?,
                Suite::MassCover => mass_checks(&mut rec, d)?,
                Suite::Tomo => tomo_checks(&mut rec, d, tol, seed)?,
            };
            if !ok {
                return Ok(out);
            }
        }
    }
    Ok(out)
}

fn zmod_checks(rec: &mut Recorder, d: u64) -> Result<bool> {
    let f = factorize(d)?;
    let product: u64 = f.prime_powers().iter().product();
    let pp = f.prime_powers();
    let coprime = pp.iter().enumerate().all(|(i, a)| pp[i + 1..].iter().all(|b| gcd(*a, *b) == 1));
    Ok(rec.record("factorization", product == d && coprime, format!("{d} = {f}")))
}

fn gfq_checks(rec: &mut Recorder, d: u64) -> Result<bool> {
    let fields = FieldFactors::new(d)?;
    for f in fields.fields() {
        let q = f.order() as u32;
        let name = format!("GF({q}) axioms");
        let mut ok = true;
        for a in 0..q {
            for b in 0..q {
                ok &= f.add(a, b) == f.add(b, a) && f.mul(a, b) == f.mul(b, a);
                for c in 0..q {
                    ok &= f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c));
                }
            }
            if a != 0 {
                ok &= f.inv(a).map(|i| f.mul(a, i)) == Some(1);
            }
        }
        if !rec.record(&name, ok, String::new()) {
            return Ok(false);
        }
        let mut worst: f64 = 0.0;
        for a in 0..q {
            for b in 0..q {
                worst = worst.max((f.chi(f.add(a, b)) - f.chi(a) * f.chi(b)).norm());
            }
            if a != 0 {
                let s: C64 = (0..q).map(|x| f.bichar(a, x)).sum();
                worst = worst.max(s.norm());
            }
        }
        if !rec.within(&format!("GF({q}) character"), worst, IDENTITY_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn phase_space_checks(rec: &mut Recorder, d: u64) -> Result<bool> {
    let lines = enumerate_isotropic_lines(d)?;
    let expected = factorize(d)?.lagrangian_count();
    if !rec.record("line count", lines.len() as u64 == expected, format!("{} lines, formula {expected}", lines.len())) {
        return Ok(false);
    }
    let mut ok = true;
    for l in &lines {
        ok &= l.points().len() as u64 == d;
        for a in l.points() {
            for b in l.points() {
                ok &= symplectic(a, b)? == 0;
            }
        }
    }
    if !rec.record("lines isotropic of size d", ok, String::new()) {
        return Ok(false);
    }
    let mut ok = true;
    for l in &lines {
        let covered: BTreeSet<_> = (0..d).map(|i| shift_line(l, i)).collect::<Result<Vec<_>>>()?
            .iter()
            .flat_map(|s| s.points().to_vec())
            .collect();
        ok &= (covered.len() as u64 == d * d) == l.has_faithful_shifts();
    }
    Ok(rec.record("shifts cover phase space iff faithful", ok, String::new()))
}

/// Largest deviation from the projection identities over one field.
pub fn projection_identity_defect(f: &FieldTable) -> Result<f64> {
    let q = f.order();
    let qn = q as usize;
    let mut worst: f64 = 0.0;
    let slopes: Vec<Slope> = Slope::all(q).collect();
    let mut projs = Vec::new();
    for &a in &slopes {
        let ps: Vec<OperatorMatrix> = (0..q as u32).map(|z| proj_p(f, a, z)).collect::<Result<_>>()?;
        for x in 0..q as u32 {
            let w = gf_weyl(f, a, x)?;
            let expansion = ps
                .iter()
                .enumerate()
                .fold(OperatorMatrix::zeros(qn), |acc, (y, p)| &acc + &p.scale(f.bichar(x, y as u32)));
            worst = worst.max(w.distance(&expansion));
        }
        for (x, px) in ps.iter().enumerate() {
            worst = worst.max(px.hermiticity_defect());
            for (z, pz) in ps.iter().enumerate() {
                let prod = px * pz;
                worst = worst.max(if x == z { prod.distance(px) } else { prod.frobenius_norm() });
            }
        }
        let total = crate::cmat::sum(qn, &ps);
        worst = worst.max(total.distance(&OperatorMatrix::identity(qn)));
        projs.push(ps);
    }
    for (i, pa) in projs.iter().enumerate() {
        for pb in &projs[i + 1..] {
            for px in pa {
                for pz in pb {
                    worst = worst.max((trace_product(px, pz).re - 1.0 / q as f64).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `max |d·Tr(P_(λ,i) P_(λ',j)) − |(λ,i) ∩ (λ',j)||` over faithfully labeled lines.
pub fn overlap_formula_defect(d: u64) -> Result<f64> {
    let refs = ShiftReference::new(d).ok_or_else(|| Error::Unsupported(format!("no shift reference for d = {d}")))?;
    let lines: Vec<_> = enumerate_isotropic_lines(d)?.into_iter().filter(|l| l.has_faithful_shifts()).collect();
    let bases: Vec<_> = lines.iter().map(|l| line_eigenbasis(l, Some(&refs))).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (la, ba) in lines.iter().zip(&bases) {
        for (lb, bb) in lines.iter().zip(&bases) {
            for (label_a, pa) in ba.labels.iter().zip(&ba.projections) {
                for (label_b, pb) in bb.labels.iter().zip(&bb.projections) {
                    let (OutcomeLabel::Line { shift: Some(i), .. }, OutcomeLabel::Line { shift: Some(j), .. }) = (label_a, label_b) else {
                        return Err(Error::Unsupported("missing shift label".into()));
                    };
                    let count = intersection_count(&shift_line(la, *i)?, &shift_line(lb, *j)?)? as f64;
                    worst = worst.max((d as f64 * trace_product(pa, pb).re - count).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn weyl_checks(rec: &mut Recorder, d: u64) -> Result<bool> {
    if d <= 12 {
        let basis = unitary_basis_f(&FieldFactors::new(d)?)?;
        let mut worst: f64 = 0.0;
        for (i, (_, a)) in basis.iter().enumerate() {
            for (j, (_, b)) in basis.iter().enumerate() {
                let expected = if i == j { d as f64 } else { 0.0 };
                worst = worst.max((hs_inner(a, b)? - C64::new(expected, 0.0)).norm());
            }
        }
        if !rec.within("field basis Gram = d·I", worst, IDENTITY_TOL) {
            return Ok(false);
        }
    }
    if d <= 8 {
        let omega = |k: u64| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64);
        let points: Vec<_> = crate::phase_space::all_points(d).collect();
        let ops: Vec<_> = points.iter().map(zd_weyl).collect();
        let mut worst: f64 = 0.0;
        for (a, ua) in points.iter().zip(&ops) {
            for (b, ub) in points.iter().zip(&ops) {
                let w = symplectic(a, b)?;
                let lhs = ua * ub;
                let rhs = (ub * ua).scale(omega((d - w) % d));
                worst = worst.max(lhs.distance(&rhs));
            }
        }
        if !rec.within("U(a)U(b) = ω^{-w(a,b)} U(b)U(a)", worst, IDENTITY_TOL) {
            return Ok(false);
        }
    }
    for f in FieldFactors::new(d)?.fields() {
        if !rec.within(&format!("GF({}) projection identities", f.order()), projection_identity_defect(f)?, IDENTITY_TOL) {
            return Ok(false);
        }
    }
    if d <= 6 {
        return Ok(rec.within("line overlap formula", overlap_formula_defect(d)?, 1e-8));
    }
    Ok(true)
}

fn mass_checks(rec: &mut Recorder, d: u64) -> Result<bool> {
    for basis in [Basis::Zd, Basis::Gf] {
        let system = basis.system(d)?;
        let masses = structured_masses(&system)?;
        let sized = masses.iter().all(|m| m.len() as u64 == d - 1);
        if !rec.record(&format!("{basis} masses have size d-1"), sized, format!("{} masses", masses.len())) {
            return Ok(false);
        }
        if d <= 12 {
            let mut failure = None;
            for m in &masses {
                if let Err(e) = verify_mass(m, &system, 1e-12) {
                    failure = Some(format!("{m}: {e}"));
                    break;
                }
            }
            let passed = failure.is_none();
            if !rec.record(&format!("{basis} masses commute and are maximal"), passed, failure.unwrap_or_default()) {
                return Ok(false);
            }
        }
        let cover = system_cover(&system)?;
        let union: BTreeSet<&OpLabel> = cover.masses.iter().flat_map(|m| m.members()).collect();
        let detail = format!("delta {}, exact {}", cover.delta(), cover.exact);
        if !rec.record(&format!("{basis} cover is complete"), union.len() as u64 == d * d - 1, detail) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn tomo_checks(rec: &mut Recorder, d: u64, tol: f64, seed: u64) -> Result<bool> {
    for basis in [Basis::Zd, Basis::Gf] {
        let design = Design::build(d, basis, true)?;
        if !rec.record(&format!("{basis} reduced design complete"), design.complete, format!("rank {}", design.rank)) {
            return Ok(false);
        }
        let sizes_ok = design.clubs.iter().all(|c| {
            let g = c.members.len();
            c.reduced.size() == g * d as usize - (g - 1) * c.club.constraint().reducible_blocks().len()
        });
        let worst_residual = design.dropped.iter().map(|x| x.residual).fold(0.0, f64::max);
        if !rec.record(&format!("{basis} club sizes"), sizes_ok, format!("size {}", design.size()))
            || !rec.within(&format!("{basis} recovery residual"), worst_residual, IDENTITY_TOL)
        {
            return Ok(false);
        }
        if let Some(bound) = design.bound() {
            if !rec.record(&format!("{basis} size bound"), design.size() as u64 <= bound, format!("{} ≤ {bound}", design.size())) {
                return Ok(false);
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            let rho = seeded_density(d as usize, seed, i);
            worst = worst.max(design.reconstruct(&design.simulate(&rho)?)?.distance(&rho));
        }
        if !rec.within(&format!("{basis} round trip"), worst, tol) {
            return Ok(false);
        }
    }
    let fields = FieldFactors::new(d)?;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let rho = seeded_density(d as usize, seed, i);
        let probs = ie_probabilities(&rho, &fields, IeConvention::AllShifts)?;
        worst = worst.max(reconstruct_inclusion_exclusion(&probs, &fields, IeConvention::AllShifts)?.distance(&rho));
    }
    Ok(rec.within("inclusion-exclusion round trip", worst, tol))
}
