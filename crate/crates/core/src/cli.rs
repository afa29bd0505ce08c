//! Command-line front end: argument model, command dispatch and output formatting.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Number, Value};

use crate::cmat::{OperatorMatrix, C64};
use crate::error::{Error, Result};
use crate::mass_cover::{structured_masses, system_cover};
use crate::phase_space::enumerate_isotropic_lines;
use crate::tomo::{
    ie_probabilities, reconstruct_inclusion_exclusion, seeded_density, Basis, Design, IeConvention,
};
use crate::verify::{run_suites, Suite, DEFAULT_DIMENSIONS};
use crate::weyl::FieldFactors;
use crate::zmod::factorize;

/// Exit status for a failed verification or an out-of-tolerance simulation.
pub const EXIT_VERIFICATION_FAILED: i32 = 3;
pub const EXIT_ERROR: i32 = 1;

/// Default tolerance on reconstruction errors.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug, Clone)]
#[command(name = "qtomo", version, about = "Reduced projective measurement designs for d-level state tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Hilbert space dimension.
    #[arg(long, global = true)]
    pub d: Option<u64>,

    /// Unitary basis: cyclic-group Weyl operators or finite-field Weyl operators.
    #[arg(long, global = true, value_enum, default_value_t = BasisArg::Zd)]
    pub basis: BasisArg,

    /// Apply the club reduction to the design.
    #[arg(long, global = true)]
    pub reduce: bool,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, default_value_t = 1)]
    pub trials: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Reconstruction tolerance for `simulate` and `verify`.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,

    /// Omit the timestamp so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Write the document to this path instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Enumerate the isotropic lines of Z_d².
    Lines,
    /// List the structured MASSes and a minimal cover.
    Mass,
    /// Build the measurement design.
    Design,
    /// Per-club reduction report.
    Reduce,
    /// Reconstruct seeded random states from exact probabilities.
    Simulate,
    /// Run invariant suites.
    Verify {
        /// `all` or one of zmod, gfq, phase_space, weyl, mass_cover, tomo.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Counts and sizes for both bases.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lines => "lines",
            Command::Mass => "mass",
            Command::Design => "design",
            Command::Reduce => "reduce",
            Command::Simulate => "simulate",
            Command::Verify { .. } => "verify",
            Command::Report => "report",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisArg {
    Zd,
    Gf,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Zd => Basis::Zd,
            BasisArg::Gf => Basis::Gf,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub d: Option<u64>,
    pub basis: Basis,
    pub reduce: bool,
    pub seed: u64,
    pub trials: u64,
    pub format: Format,
    pub tolerance: f64,
    pub deterministic: bool,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Self {
        Self {
            command: cli.command.clone(),
            d: cli.d,
            basis: cli.basis.into(),
            reduce: cli.reduce,
            seed: cli.seed,
            trials: cli.trials,
            format: cli.format,
            tolerance: cli.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            deterministic: cli.deterministic,
        }
    }

    fn dimension(&self) -> Result<u64> {
        let d = self.d.ok_or_else(|| Error::Unsupported(format!("{} needs --d", self.command.name())))?;
        if d < 2 {
            return Err(Error::InvalidModulus { d, reason: "dimension must be at least 2".into() });
        }
        Ok(d)
    }
}

/// The emitted document and the process exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub body: String,
}

struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Report {
    json: Map<String, Value>,
    table: Option<Table>,
    text: String,
    failed: bool,
}

/// A float with 17 significant digits.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&format!("{x:.16e}")).expect("exponent notation is a valid JSON number"))
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn complex(z: C64) -> Value {
    json!([num(z.re), num(z.im)])
}

/// Row-major matrix of `[re, im]` pairs.
pub fn matrix(m: &OperatorMatrix) -> Value {
    let n = m.dim();
    Value::Array((0..n).map(|r| Value::Array((0..n).map(|c| complex(m.get(r, c))).collect())).collect())
}

fn header(config: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(config.command.name()));
    if let Some(d) = config.d {
        m.insert("d".into(), json!(d));
    }
    m
}

/// Runs one command and renders its document.
pub fn run(config: &RunConfig) -> Output {
    let result = if config.trials == 0 {
        Err(Error::OutOfRange("--trials must be at least 1".into()))
    } else if !(config.tolerance >= 0.0) {
        Err(Error::OutOfRange("--tolerance must be nonnegative".into()))
    } else {
        match &config.command {
            Command::Lines => lines(config),
            Command::Mass => mass(config),
            Command::Design => design(config),
            Command::Reduce => reduce(config),
            Command::Simulate => simulate(config),
            Command::Verify { suite } => verify(config, suite),
            Command::Report => report(config),
        }
    };
    match result.and_then(|r| render(config, r)) {
        Ok(out) => out,
        Err(e) => error_output(config, &e),
    }
}

fn render(config: &RunConfig, report: Report) -> Result<Output> {
    let code = if report.failed { EXIT_VERIFICATION_FAILED } else { 0 };
    let body = match config.format {
        Format::Json => {
            let mut doc = report.json;
            if !config.deterministic {
                let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                doc.insert("generated_at".into(), json!(secs));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| Error::Unsupported(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let table = report.table.ok_or_else(|| {
                Error::Unsupported(format!("{} output contains matrices; use --format json", config.command.name()))
            })?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Unsupported(e.to_string());
            w.write_record(&table.headers).map_err(io)?;
            for row in &table.rows {
                w.write_record(row).map_err(io)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Unsupported(e.to_string()))?)
                .map_err(|e| Error::Unsupported(e.to_string()))?
        }
        Format::Text => report.text,
    };
    Ok(Output { code, body })
}

fn error_kind(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

fn error_output(config: &RunConfig, e: &Error) -> Output {
    let mut doc = header(config);
    doc.insert("error".into(), json!({ "kind": error_kind(e), "message": e.to_string() }));
    let body = match config.format {
        Format::Text => format!("error: {e}\n"),
        _ => serde_json::to_string_pretty(&Value::Object(doc)).expect("plain JSON") + "\n",
    };
    Output { code: EXIT_ERROR, body }
}

fn point_pairs<'a>(points: impl IntoIterator<Item = &'a crate::phase_space::PhasePoint>) -> Value {
    Value::Array(points.into_iter().map(|p| json!([p.m, p.n])).collect())
}

fn lines(config: &RunConfig) -> Result<Report> {
    let d = config.dimension()?;
    let lines = enumerate_isotropic_lines(d)?;
    let fact = factorize(d)?;
    let mut json = header(config);
    json.insert("factorization".into(), json!(fact.to_string()));
    json.insert("count".into(), json!(lines.len()));
    json.insert("expected_count".into(), json!(fact.lagrangian_count()));
    let records: Vec<Value> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            json!({
                "index": i,
                "generators": point_pairs(l.generators()),
                "points": point_pairs(l.points()),
                "cyclic": l.is_cyclic(),
                "faithful_shifts": l.has_faithful_shifts(),
            })
        })
        .collect();
    json.insert("lines".into(), Value::Array(records));
    let rows = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let gens: Vec<String> = l.generators().iter().map(ToString::to_string).collect();
            vec![i.to_string(), l.is_cyclic().to_string(), l.has_faithful_shifts().to_string(), gens.join(" ")]
        })
        .collect();
    let mut text = format!("d = {d} ({fact}): {} isotropic lines, formula {}\n", lines.len(), fact.lagrangian_count());
    for (i, l) in lines.iter().enumerate() {
        text.push_str(&format!("{i:4}  {l}{}\n", if l.is_cyclic() { "" } else { "  (non-cyclic)" }));
    }
    Ok(Report {
        json,
        table: Some(Table { headers: vec!["index", "cyclic", "faithful_shifts", "generators"], rows }),
        text,
        failed: false,
    })
}

fn mass(config: &RunConfig) -> Result<Report> {
    let d = config.dimension()?;
    let system = config.basis.system(d)?;
    let masses = structured_masses(&system)?;
    let cover = system_cover(&system)?;
    let mut json = header(config);
    json.insert("basis".into(), json!(config.basis));
    json.insert("count".into(), json!(masses.len()));
    let in_cover = |i: usize| cover.chosen.contains(&i);
    json.insert(
        "masses".into(),
        Value::Array(
            masses
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let members: Vec<String> = m.members().iter().map(ToString::to_string).collect();
                    json!({ "index": i, "source": m.to_string(), "size": m.len(), "in_cover": in_cover(i), "members": members })
                })
                .collect(),
        ),
    );
    json.insert(
        "cover".into(),
        json!({
            "delta": cover.delta(),
            "exact": cover.exact,
            "lower_bound": cover.lower_bound,
            "nodes": cover.nodes,
            "chosen": cover.chosen,
        }),
    );
    json.insert("projection_count".into(), json!(cover.delta() as u64 * d));
    json.insert("basis_element_count".into(), json!(cover.delta() as u64 * (d - 1)));
    let rows = masses
        .iter()
        .enumerate()
        .map(|(i, m)| vec![i.to_string(), m.to_string(), m.len().to_string(), in_cover(i).to_string()])
        .collect();
    let mut text = format!(
        "d = {d}, basis {}: {} masses, minimal cover δ = {}{}\n",
        config.basis,
        masses.len(),
        cover.delta(),
        if cover.exact { "" } else { " (search budget exhausted)" }
    );
    for (i, m) in masses.iter().enumerate() {
        text.push_str(&format!("{i:4} {} {m}\n", if in_cover(i) { '*' } else { ' ' }));
    }
    Ok(Report {
        json,
        table: Some(Table { headers: vec!["index", "source", "size", "in_cover"], rows }),
        text,
        failed: false,
    })
}

fn design_summary(json: &mut Map<String, Value>, design: &Design) {
    json.insert("delta".into(), json!(design.delta()));
    json.insert("cover_exact".into(), json!(design.cover.exact));
    json.insert("basis_element_count".into(), json!(design.basis_element_count()));
    json.insert("unreduced_size".into(), json!(design.unreduced_size()));
}

fn design(config: &RunConfig) -> Result<Report> {
    let d = config.dimension()?;
    let design = Design::build(d, config.basis, config.reduce)?;
    let mut json = header(config);
    json.insert("basis".into(), json!(config.basis));
    json.insert("reduce".into(), json!(config.reduce));
    json.insert("seed".into(), json!(config.seed));
    design_summary(&mut json, &design);
    json.insert(
        "measurements".into(),
        Value::Array(
            design
                .measurements
                .iter()
                .enumerate()
                .map(|(i, m)| json!({ "index": i, "mass": m.source().to_string(), "outcomes": m.labels() }))
                .collect(),
        ),
    );
    let clubs: Vec<Value> = design
        .clubs
        .iter()
        .enumerate()
        .map(|(c, club)| {
            let q = club.club.constraint();
            json!({
                "index": c,
                "members": club.members,
                "g": club.members.len(),
                "tau": q.tau(),
                "reducible_blocks": q.reducible_blocks(),
                "generator": q.generator().map(ToString::to_string),
                "eigenvalues": q.eigenvalues().map(|e| e.iter().map(|&z| complex(z)).collect::<Vec<_>>()),
            })
        })
        .collect();
    json.insert("club".into(), Value::Array(clubs));
    json.insert(
        "Q".into(),
        Value::Array(
            design.clubs.iter().map(|c| Value::Array(c.club.constraint().blocks().iter().map(matrix).collect())).collect(),
        ),
    );
    let projs = design.kept_projections();
    json.insert(
        "kept".into(),
        Value::Array(
            design
                .kept
                .iter()
                .zip(&projs)
                .map(|(k, p)| json!({ "measurement": k.measurement, "outcome": k.outcome, "projection": matrix(p) }))
                .collect(),
        ),
    );
    json.insert(
        "dropped".into(),
        Value::Array(
            design
                .dropped
                .iter()
                .map(|x| {
                    json!({
                        "club": x.club,
                        "v": x.v,
                        "t": x.t,
                        "measurement": x.measurement,
                        "outcome": x.outcome,
                        "recipe": x.recipe.iter().map(|&(i, c)| json!({ "kept": i, "coefficient": num(c) })).collect::<Vec<_>>(),
                        "residual": num(x.residual),
                    })
                })
                .collect(),
        ),
    );
    let bound = design.bound();
    json.insert("size".into(), json!(design.size()));
    json.insert("bound".into(), json!(bound));
    json.insert("within_bound".into(), json!(bound.map(|b| design.size() as u64 <= b)));
    json.insert("complete".into(), json!(design.complete));
    json.insert("rank".into(), json!(design.rank));
    let text = format!(
        "d = {d}, basis {}: δ = {}, {} measurements, {} clubs, size {} (unreduced {}), bound {}, complete {}, rank {}\n",
        config.basis,
        design.delta(),
        design.measurements.len(),
        design.clubs.len(),
        design.size(),
        design.unreduced_size(),
        bound.map_or("n/a".to_string(), |b| b.to_string()),
        design.complete,
        design.rank,
    );
    Ok(Report { json, table: None, text, failed: false })
}

fn reduce(config: &RunConfig) -> Result<Report> {
    let d = config.dimension()?;
    let design = Design::build(d, config.basis, true)?;
    let n = d as usize;
    let mut json = header(config);
    json.insert("basis".into(), json!(config.basis));
    design_summary(&mut json, &design);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (c, club) in design.clubs.iter().enumerate() {
        let g = club.members.len();
        let t = club.club.constraint().reducible_blocks().len();
        let formula = g * n - (g - 1) * t;
        let residual = club.reduced.dropped.iter().map(|x| x.residual).fold(0.0, f64::max);
        records.push(json!({
            "index": c,
            "members": club.members,
            "g": g,
            "tau": club.club.constraint().tau(),
            "reducible": t,
            "unreduced": g * n,
            "reduced": club.reduced.size(),
            "formula": formula,
            "max_residual": num(residual),
            "rank": club.reduced.completeness_rank,
        }));
        rows.push(vec![
            c.to_string(),
            g.to_string(),
            club.club.constraint().tau().to_string(),
            t.to_string(),
            (g * n).to_string(),
            club.reduced.size().to_string(),
            formula.to_string(),
            fmt_f(residual),
        ]);
    }
    json.insert("clubs".into(), Value::Array(records));
    json.insert("size".into(), json!(design.size()));
    json.insert("bound".into(), json!(design.bound()));
    json.insert("complete".into(), json!(design.complete));
    json.insert("rank".into(), json!(design.rank));
    let mut text = format!(
        "d = {d}, basis {}: {} clubs, size {} → {}\n",
        config.basis,
        design.clubs.len(),
        design.unreduced_size(),
        design.size()
    );
    for r in &rows {
        text.push_str(&format!("club {}: g = {}, τ = {}, |T| = {}, {} → {}\n", r[0], r[1], r[2], r[3], r[4], r[5]));
    }
    Ok(Report {
        json,
        table: Some(Table {
            headers: vec!["club", "g", "tau", "reducible", "unreduced", "reduced", "formula", "max_residual"],
            rows,
        }),
        text,
        failed: false,
    })
}

struct Trial {
    linear: f64,
    inclusion_exclusion: f64,
    agreement: f64,
}

fn simulate(config: &RunConfig) -> Result<Report> {
    let d = config.dimension()?;
    let design = Design::build(d, config.basis, config.reduce)?;
    let fields = FieldFactors::new(d)?;
    let trials: Vec<Trial> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let rho = seeded_density(d as usize, config.seed, t);
            let linear = design.reconstruct(&design.simulate(&rho)?)?;
            let probs = ie_probabilities(&rho, &fields, IeConvention::AllShifts)?;
            let ie = reconstruct_inclusion_exclusion(&probs, &fields, IeConvention::AllShifts)?;
            Ok(Trial { linear: linear.distance(&rho), inclusion_exclusion: ie.distance(&rho), agreement: linear.distance(&ie) })
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&Trial) -> f64| trials.iter().map(f).fold(0.0, f64::max);
    let (max_lin, max_ie, max_agree) = (max(|t| t.linear), max(|t| t.inclusion_exclusion), max(|t| t.agreement));
    let agreement_tol = 10.0 * config.tolerance;
    let ok = max_lin <= config.tolerance && max_ie <= config.tolerance && max_agree <= agreement_tol;

    let mut json = header(config);
    json.insert("basis".into(), json!(config.basis));
    json.insert("reduce".into(), json!(config.reduce));
    json.insert("seed".into(), json!(config.seed));
    json.insert("trials".into(), json!(config.trials));
    json.insert("design_size".into(), json!(design.size()));
    json.insert("tolerance".into(), num(config.tolerance));
    json.insert("agreement_tolerance".into(), num(agreement_tol));
    json.insert(
        "results".into(),
        Value::Array(
            trials
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    json!({
                        "trial": i,
                        "linear_error": num(t.linear),
                        "inclusion_exclusion_error": num(t.inclusion_exclusion),
                        "agreement": num(t.agreement),
                    })
                })
                .collect(),
        ),
    );
    json.insert("max_linear_error".into(), num(max_lin));
    json.insert("max_inclusion_exclusion_error".into(), num(max_ie));
    json.insert("max_agreement".into(), num(max_agree));
    json.insert("within_tolerance".into(), json!(ok));
    let rows = trials
        .iter()
        .enumerate()
        .map(|(i, t)| vec![i.to_string(), fmt_f(t.linear), fmt_f(t.inclusion_exclusion), fmt_f(t.agreement)])
        .collect();
    let text = format!(
        "d = {d}, basis {}, {} trials: max linear error {}, max inclusion-exclusion error {}, max disagreement {} ({})\n",
        config.basis,
        config.trials,
        fmt_f(max_lin),
        fmt_f(max_ie),
        fmt_f(max_agree),
        if ok { "ok" } else { "OUT OF TOLERANCE" }
    );
    Ok(Report {
        json,
        table: Some(Table { headers: vec!["trial", "linear_error", "inclusion_exclusion_error", "agreement"], rows }),
        text,
        failed: !ok,
    })
}

fn verify(config: &RunConfig, suite: &str) -> Result<Report> {
    let suites = Suite::parse_selection(suite)?;
    let dims: Vec<u64> = match config.d {
        Some(_) => vec![config.dimension()?],
        None => DEFAULT_DIMENSIONS.to_vec(),
    };
    let checks = run_suites(&suites, &dims, config.tolerance, config.seed)?;
    let passed = checks.iter().all(|c| c.passed);
    let mut json = header(config);
    json.insert("suite".into(), json!(suite));
    json.insert("dimensions".into(), json!(dims));
    json.insert("checks".into(), serde_json::to_value(&checks).map_err(|e| Error::Unsupported(e.to_string()))?);
    json.insert("passed".into(), json!(passed));
    let rows = checks
        .iter()
        .map(|c| vec![c.suite.to_string(), c.d.to_string(), c.name.clone(), c.passed.to_string(), c.detail.clone()])
        .collect();
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!("[{}] {} d={} {} {}\n", if c.passed { "pass" } else { "FAIL" }, c.suite, c.d, c.name, c.detail));
    }
    text.push_str(if passed { "all checks passed\n" } else { "verification FAILED\n" });
    Ok(Report {
        json,
        table: Some(Table { headers: vec!["suite", "d", "check", "passed", "detail"], rows }),
        text,
        failed: !passed,
    })
}

fn report(config: &RunConfig) -> Result<Report> {
    let d = config.dimension()?;
    let fact = factorize(d)?;
    let lines = enumerate_isotropic_lines(d)?;
    let cyclic = lines.iter().filter(|l| l.is_cyclic()).count();
    let mut json = header(config);
    json.insert("factorization".into(), json!(fact.to_string()));
    json.insert("prime_powers".into(), json!(fact.prime_powers()));
    json.insert("lines".into(), json!(lines.len()));
    json.insert("cyclic_lines".into(), json!(cyclic));
    json.insert("slope_tuples".into(), json!(fact.slope_tuple_count()));
    let mut rows = Vec::new();
    let mut per_basis = Vec::new();
    let mut text = format!(
        "d = {d} = {fact}: {} isotropic lines ({cyclic} cyclic), {} slope tuples\n",
        lines.len(),
        fact.slope_tuple_count()
    );
    for basis in [Basis::Zd, Basis::Gf] {
        let design = Design::build(d, basis, true)?;
        let bound = design.bound();
        per_basis.push(json!({
            "basis": basis,
            "delta": design.delta(),
            "cover_exact": design.cover.exact,
            "basis_element_count": design.basis_element_count(),
            "unreduced_size": design.unreduced_size(),
            "reduced_size": design.size(),
            "clubs": design.clubs.len(),
            "bound": bound,
            "complete": design.complete,
        }));
        let bound_s = bound.map_or(String::new(), |b| b.to_string());
        text.push_str(&format!(
            "{basis}: δ = {}, {} basis elements, {} projections, reduced to {}{}\n",
            design.delta(),
            design.basis_element_count(),
            design.unreduced_size(),
            design.size(),
            bound.map_or(String::new(), |b| format!(" (bound {b})"))
        ));
        rows.push(vec![
            basis.to_string(),
            design.delta().to_string(),
            design.basis_element_count().to_string(),
            design.unreduced_size().to_string(),
            design.size().to_string(),
            bound_s,
            design.complete.to_string(),
        ]);
    }
    json.insert("designs".into(), Value::Array(per_basis));
    Ok(Report {
        json,
        table: Some(Table {
            headers: vec!["basis", "delta", "basis_elements", "unreduced_size", "reduced_size", "bound", "complete"],
            rows,
        }),
        text,
        failed: false,
    })
}
