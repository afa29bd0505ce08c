//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use qtomo::cmat::OperatorMatrix;
use qtomo::gfq::FieldTable;
use qtomo::mass_cover::{line_masses, OpLabel};
use qtomo::phase_space::{all_points, enumerate_isotropic_lines, PhasePoint};
use qtomo::tomo::{ie_probabilities, reconstruct_inclusion_exclusion, seeded_density, Basis, Design, IeConvention};
use qtomo::weyl::{gf_weyl, line_eigenbasis, proj_p, unitary_basis_f, zd_weyl, FieldFactors, OutcomeLabel, ShiftReference, Slope};

const COMMUTE_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-10;
const OVERLAP_TOL: f64 = 1e-8;
const RECON_TOL: f64 = 1e-9;
const AGREE_TOL: f64 = 1e-8;
const RECOVERY_TOL: f64 = 1e-10;
const STATES: u64 = 20;
const SEED: u64 = 7;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn factor(mut d: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= d {
        let mut s = 0;
        while d % p == 0 {
            d /= p;
            s += 1;
        }
        if s > 0 {
            out.push((p, s));
        }
        p += 1;
    }
    if d > 1 {
        out.push((d, 1));
    }
    out
}

fn line_count_formula(d: u64) -> u64 {
    factor(d).iter().map(|&(p, s)| (p.pow(s + 1) - 1) / (p - 1)).product()
}

/// Subgroups of Z_d² are 2-generated; collect every isotropic one of order d.
fn brute_force_lagrangians(d: u64) -> usize {
    let pts: Vec<(u64, u64)> = (0..d).flat_map(|m| (0..d).map(move |n| (m, n))).collect();
    let mut found: BTreeSet<Vec<(u64, u64)>> = BTreeSet::new();
    for (i, &a) in pts.iter().enumerate() {
        for &b in &pts[i..] {
            if (a.0 * b.1) % d != (a.1 * b.0) % d {
                continue;
            }
            let mut group: BTreeSet<(u64, u64)> = BTreeSet::new();
            for s in 0..d {
                for t in 0..d {
                    group.insert(((s * a.0 + t * b.0) % d, (s * a.1 + t * b.1) % d));
                }
            }
            if group.len() as u64 == d {
                found.insert(group.into_iter().collect());
            }
        }
    }
    found.len()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    for d in 2..=36u64 {
        let n = enumerate_isotropic_lines(d).map_err(|e| e.to_string())?.len() as u64;
        check(n == line_count_formula(d), format!("d={d}: {n} lines, formula {}", line_count_formula(d)))?;
    }
    for d in 2..=12u64 {
        let brute = brute_force_lagrangians(d) as u64;
        check(brute == line_count_formula(d), format!("d={d}: brute force found {brute}"))?;
    }
    Ok(format!("d = 2..36 match the product formula, brute force agrees for d <= 12 ({:.2?})", start.elapsed()))
}

/// Maximal cliques by Bron–Kerbosch with pivoting.
fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<BTreeSet<usize>> {
    fn bk(adj: &[Vec<bool>], r: &mut Vec<usize>, mut p: Vec<usize>, mut x: Vec<usize>, out: &mut Vec<BTreeSet<usize>>) {
        if p.is_empty() && x.is_empty() {
            out.push(r.iter().copied().collect());
            return;
        }
        let pivot = *p.iter().chain(&x).max_by_key(|&&u| p.iter().filter(|&&v| adj[u][v]).count()).unwrap();
        for v in p.clone().into_iter().filter(|&v| !adj[pivot][v]) {
            r.push(v);
            let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
            bk(adj, r, np, nx, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    bk(adj, &mut Vec::new(), (0..adj.len()).collect(), Vec::new(), &mut out);
    out
}

fn criterion_2() -> Outcome {
    for d in 2..=12u64 {
        let points: Vec<PhasePoint> = all_points(d).filter(|p| !p.is_origin()).collect();
        let ops: Vec<OperatorMatrix> = points.iter().map(zd_weyl).collect();
        let n = points.len();
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let c = ops[i].commutator_norm(&ops[j]) <= COMMUTE_TOL;
                adj[i][j] = c;
                adj[j][i] = c;
            }
        }
        let oracle: BTreeSet<BTreeSet<usize>> = maximal_cliques(&adj).into_iter().collect();
        let masses = line_masses(d).map_err(|e| e.to_string())?;
        let ours: BTreeSet<BTreeSet<usize>> = masses
            .iter()
            .map(|m| {
                m.members()
                    .iter()
                    .map(|l| match l {
                        OpLabel::Zd(p) => points.iter().position(|q| q == p).unwrap(),
                        OpLabel::Gf(_) => usize::MAX,
                    })
                    .collect()
            })
            .collect();
        check(masses.iter().all(|m| m.len() as u64 == d - 1), format!("d={d}: a MASS is not of size d-1"))?;
        check(oracle.iter().all(|c| c.len() as u64 == d - 1), format!("d={d}: a maximal commuting set is not of size d-1"))?;
        check(ours.len() as u64 == line_count_formula(d), format!("d={d}: {} masses", ours.len()))?;
        check(ours == oracle, format!("d={d}: line masses differ from the maximal commuting sets"))?;
    }
    Ok("d <= 12: line MASSes equal all maximal commuting sets, each of size d-1, count matches".into())
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2u64, 3, 4, 6, 12] {
        let basis = unitary_basis_f(&FieldFactors::new(d).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(basis.len() as u64 == d * d, format!("d={d}: {} elements", basis.len()))?;
        for (i, (_, a)) in basis.iter().enumerate() {
            for (j, (_, b)) in basis.iter().enumerate() {
                let g: C64 = a.entries().iter().zip(b.entries()).map(|(x, y)| x.conj() * y).sum();
                let expected = if i == j { d as f64 } else { 0.0 };
                worst = worst.max((g - expected).norm());
            }
        }
    }
    check(worst <= IDENTITY_TOL, format!("Gram deviation {worst:e}"))?;
    Ok(format!("max |Gram - d I| = {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut unbiased: f64 = 0.0;
    for (p, s) in [(2u64, 1u32), (3, 1), (2, 2), (5, 1), (2, 3), (3, 2)] {
        let f = FieldTable::new(p, s).map_err(|e| e.to_string())?;
        let q = f.order();
        let qn = q as usize;
        let slopes: Vec<Slope> = Slope::all(q).collect();
        let projs: Vec<Vec<OperatorMatrix>> = slopes
            .iter()
            .map(|&a| (0..q as u32).map(|z| proj_p(&f, a, z)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (&a, ps) in slopes.iter().zip(&projs) {
            let ws: Vec<OperatorMatrix> = (0..q as u32).map(|x| gf_weyl(&f, a, x)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            for x in 0..qn {
                // W(a,x) = Σ_y <x,y> P(a,y)
                let w = OperatorMatrix::from_fn(qn, |r, c| (0..qn).map(|y| f.bichar(x as u32, y as u32) * ps[y].get(r, c)).sum());
                worst = worst.max(w.distance(&ws[x]));
                // P(a,z) = q⁻¹ Σ_y conj<z,y> W(a,y)
                let pz = OperatorMatrix::from_fn(qn, |r, c| {
                    (0..qn).map(|y| f.bichar(x as u32, y as u32).conj() * ws[y].get(r, c)).sum::<C64>() / q as f64
                });
                worst = worst.max(pz.distance(&ps[x]));
                for z in 0..qn {
                    let prod = &ps[x] * &ps[z];
                    worst = worst.max(if x == z { prod.distance(&ps[x]) } else { prod.frobenius_norm() });
                }
            }
            let total = ps.iter().fold(OperatorMatrix::zeros(qn), |acc, p| &acc + p);
            worst = worst.max(total.distance(&OperatorMatrix::identity(qn)));
        }
        for (i, pa) in projs.iter().enumerate() {
            for pb in &projs[i + 1..] {
                for px in pa {
                    for pz in pb {
                        let t = (px * pz).trace();
                        unbiased = unbiased.max((t - 1.0 / q as f64).norm());
                    }
                }
            }
        }
    }
    check(worst <= IDENTITY_TOL && unbiased <= IDENTITY_TOL, format!("defect {worst:e}, unbiasedness {unbiased:e}"))?;
    Ok(format!("q in {{2,3,4,5,8,9}}: identity defect {worst:.1e}, |Tr P P' - 1/q| <= {unbiased:.1e}"))
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    for d in 2..=6u64 {
        let refs = ShiftReference::new(d).ok_or(format!("d={d}: no shift reference"))?;
        let lines: Vec<_> = enumerate_isotropic_lines(d).map_err(|e| e.to_string())?.into_iter().filter(|l| l.has_faithful_shifts()).collect();
        check(!lines.is_empty(), format!("d={d}: no faithfully labeled lines"))?;
        let mut labeled = Vec::new();
        for l in &lines {
            let basis = line_eigenbasis(l, Some(&refs)).map_err(|e| e.to_string())?;
            for (label, p) in basis.labels.iter().zip(basis.projections) {
                let OutcomeLabel::Line { shift: Some(i), .. } = label else {
                    return Err(format!("d={d}: outcome without a shift label"));
                };
                let shifted: BTreeSet<(u64, u64)> = l.points().iter().map(|q| (q.m, (q.n + i) % d)).collect();
                labeled.push((shifted, p));
            }
        }
        for (sa, pa) in &labeled {
            for (sb, pb) in &labeled {
                let count = sa.intersection(sb).count() as f64;
                worst = worst.max((d as f64 * (pa * pb).trace().re - count).abs());
                pairs += 1;
            }
        }
    }
    check(worst <= OVERLAP_TOL, format!("overlap defect {worst:e}"))?;
    Ok(format!("{pairs} label pairs, max |d Tr(PP') - |intersection|| = {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (mut lin, mut ie, mut agree) = (0.0f64, 0.0f64, 0.0f64);
    for d in [2u64, 3, 4, 6, 12] {
        let design = Design::build(d, Basis::Gf, true).map_err(|e| e.to_string())?;
        let fields = FieldFactors::new(d).map_err(|e| e.to_string())?;
        for t in 0..STATES {
            let rho = seeded_density(d as usize, SEED, t);
            let a = design.reconstruct(&design.simulate(&rho).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let probs = ie_probabilities(&rho, &fields, IeConvention::AllShifts).map_err(|e| e.to_string())?;
            let b = reconstruct_inclusion_exclusion(&probs, &fields, IeConvention::AllShifts).map_err(|e| e.to_string())?;
            lin = lin.max(a.matrix().distance(rho.matrix()));
            ie = ie.max(b.matrix().distance(rho.matrix()));
            agree = agree.max(a.matrix().distance(b.matrix()));
        }
    }
    check(lin <= RECON_TOL && ie <= RECON_TOL && agree <= AGREE_TOL, format!("linear {lin:e}, ie {ie:e}, agreement {agree:e}"))?;
    Ok(format!(
        "{STATES} states per d in {{2,3,4,6,12}}: linear {lin:.1e}, inclusion-exclusion {ie:.1e}, agreement {agree:.1e} ({:.2?})",
        start.elapsed()
    ))
}

fn real_rank(mats: &[&OperatorMatrix], d: usize) -> usize {
    let mut all: Vec<&OperatorMatrix> = mats.to_vec();
    let id = OperatorMatrix::identity(d);
    all.push(&id);
    let m = DMatrix::from_fn(2 * d * d, all.len(), |r, c| {
        let z = all[c].entries()[r / 2];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let sv = m.singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > 1e-8 * max).count()
}

fn criterion_7() -> Outcome {
    let mut clubs = 0usize;
    let mut worst: f64 = 0.0;
    for (d, basis) in [(4u64, Basis::Zd), (4, Basis::Gf), (6, Basis::Zd), (6, Basis::Gf)] {
        let n = d as usize;
        let design = Design::build(d, basis, true).map_err(|e| e.to_string())?;
        for club in &design.clubs {
            let g = club.members.len();
            let t = club.club.constraint().reducible_blocks().len();
            check(club.reduced.size() == g * n - (g - 1) * t, format!("d={d} {basis}: club size {}", club.reduced.size()))?;
            clubs += 1;
        }
        let kept = design.kept_projections();
        for dp in &design.dropped {
            let actual = &design.measurements[dp.measurement].projections()[dp.outcome];
            let recovered = dp.recipe.iter().fold(OperatorMatrix::zeros(n), |acc, &(i, c)| &acc + &kept[i].scale_real(c));
            worst = worst.max(recovered.distance(actual));
        }
        let rank = real_rank(&kept, n);
        check(rank == n * n, format!("d={d} {basis}: rank {rank}"))?;
    }
    check(clubs > 0, "no clubs were formed")?;
    check(worst <= RECOVERY_TOL, format!("recovery defect {worst:e}"))?;
    Ok(format!("{clubs} clubs at d in {{4,6}}: sizes match g d - (g-1)|T|, recovery defect {worst:.1e}, rank d^2"))
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    for (d, basis, delta, bound) in [(6u64, Basis::Gf, 12usize, 52u64), (6, Basis::Zd, 12, 52), (10, Basis::Gf, 18, 148)] {
        let design = Design::build(d, basis, true).map_err(|e| e.to_string())?;
        check(design.delta() == delta, format!("d={d} {basis}: delta {}", design.delta()))?;
        check(4 + (d - 2) * delta as u64 == bound && design.bound() == Some(bound), format!("d={d}: bound {:?}", design.bound()))?;
        check(design.size() as u64 <= bound, format!("d={d} {basis}: size {} > {bound}", design.size()))?;
        check(design.complete, format!("d={d} {basis}: incomplete"))?;
        notes.push(format!("d={d} {basis}: {} <= {bound}", design.size()));
    }
    let out = Command::new(env!("CARGO_BIN_EXE_qtomo"))
        .args(["design", "--d", "6", "--basis", "gf", "--reduce", "--deterministic"])
        .output()
        .map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    check(doc["bound"].as_u64() == Some(52), "design document lacks bound 52")?;
    check(doc["size"].as_u64().is_some_and(|s| s <= 52), "design document size exceeds the bound")?;
    Ok(notes.join(", "))
}

fn criterion_9() -> Outcome {
    let args = ["design", "--d", "6", "--basis", "gf", "--reduce", "--seed", "7", "--deterministic"];
    let run = || Command::new(env!("CARGO_BIN_EXE_qtomo")).args(args).output().map_err(|e| e.to_string());
    let (a, b) = (run()?, run()?);
    check(a.status.success() && b.status.success(), "design command failed")?;
    check(!a.stdout.is_empty() && a.stdout == b.stdout, "outputs differ")?;
    Ok(format!("two runs produced identical {} byte documents", a.stdout.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("line counting", criterion_1),
        ("W-MASS structure", criterion_2),
        ("unitary basis orthogonality", criterion_3),
        ("projection identities", criterion_4),
        ("overlap formula", criterion_5),
        ("reconstruction round trip", criterion_6),
        ("club reduction", criterion_7),
        ("size bound", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
