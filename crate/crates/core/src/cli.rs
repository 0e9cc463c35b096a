//! Command-line front end: parse inputs, run a pipeline, print a report.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::complex::FanComplex;
use crate::decompose::decomposition_theorem_report;
use crate::error::{Error, Result};
use crate::fan::{subdivision_map_with, ConeId, Fan, FanMap};
use crate::graded::DegreeWindow;
use crate::io::{parse_complex, read_fan, write_complex};
use crate::minimal::{build_minimal, ih_module, verify_minimality, BuildOptions, StalkReport};
use crate::oracles::{h_vector, predicted_ih, predicted_ih_toric, predicted_stalk};
use crate::pushforward::{pushforward, verify_pushforward};

#[derive(Parser, Debug)]
#[command(name = "fancomplex", version, about = "Minimal complexes and decompositions on rational fans")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Largest internal degree computed; defaults to n + 4.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub degree_max: Option<i32>,
    /// Where to write the serialized complex or report.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Machine,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fan validity and completeness.
    Fan {
        #[command(subcommand)]
        action: FanAction,
    },
    /// Minimal complex of a fan.
    Minimal {
        #[command(subcommand)]
        action: MinimalAction,
    },
    /// Generator degrees of every component, compared with the g-polynomials.
    Stalks {
        #[arg(long)]
        fan: PathBuf,
    },
    /// Lowest cohomology of the minimal complex, compared with the h-vector.
    Ih {
        #[arg(long)]
        fan: PathBuf,
    },
    /// Direct image of the minimal complex of a subdivision.
    Pushforward {
        /// Target fan.
        #[arg(long)]
        fan: PathBuf,
        /// Subdividing fan, optionally with `map:` lines.
        #[arg(long)]
        subdivision: PathBuf,
    },
    /// Splitting of the direct image into shifted minimal complexes.
    Decompose {
        #[arg(long)]
        fan: PathBuf,
        #[arg(long)]
        subdivision: PathBuf,
    },
    /// Checks a serialized complex.
    Verify {
        #[arg(long)]
        complex: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum FanAction {
    Check {
        #[arg(long)]
        fan: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum MinimalAction {
    Build {
        #[arg(long)]
        fan: PathBuf,
    },
}

/// One result line: object, cone, degree, value, certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub object: String,
    pub cone: String,
    pub degree: String,
    pub value: String,
    pub certificate: String,
}

fn record(object: &str, cone: impl ToString, degree: impl ToString, value: impl ToString, certificate: impl ToString) -> Record {
    Record {
        object: object.into(),
        cone: cone.to_string(),
        degree: degree.to_string(),
        value: value.to_string(),
        certificate: certificate.to_string(),
    }
}

/// Freeness and exactness are only checked up to the top of the window.
fn window_record(w: DegreeWindow) -> Record {
    record("window", "-", format!("[{},{}]", w.min, w.max), "certificates valid on window", "-")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Records plus an optional artifact (a serialized complex).
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub records: Vec<Record>,
    pub artifact: Option<String>,
    pub ok: bool,
}

impl Report {
    fn new() -> Self {
        Self { records: Vec::new(), artifact: None, ok: true }
    }

    fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    fn check(&mut self, object: &str, cone: impl ToString, ok: bool, detail: impl ToString) {
        self.ok &= ok;
        self.push(record(object, cone, "-", detail, verdict(ok)));
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Machine => {
                out.push_str("object\tcone\tdegree\tvalue\tcertificate\n");
                for r in &self.records {
                    let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.object, r.cone, r.degree, r.value, r.certificate);
                }
            }
            Format::Human => {
                let widths = self.records.iter().fold([6, 4, 6, 5], |w, r| {
                    [w[0].max(r.object.len()), w[1].max(r.cone.len()), w[2].max(r.degree.len()), w[3].max(r.value.len())]
                });
                let _ = writeln!(
                    out,
                    "{:<a$}  {:<b$}  {:<c$}  {:<d$}  certificate",
                    "object",
                    "cone",
                    "degree",
                    "value",
                    a = widths[0],
                    b = widths[1],
                    c = widths[2],
                    d = widths[3]
                );
                for r in &self.records {
                    let _ = writeln!(
                        out,
                        "{:<a$}  {:<b$}  {:<c$}  {:<d$}  {}",
                        r.object,
                        r.cone,
                        r.degree,
                        r.value,
                        r.certificate,
                        a = widths[0],
                        b = widths[1],
                        c = widths[2],
                        d = widths[3]
                    );
                }
                let _ = writeln!(out, "overall: {}", verdict(self.ok));
            }
        }
        out
    }
}

fn window(fan: &Fan, common: &Common) -> DegreeWindow {
    match common.degree_max {
        Some(max) => DegreeWindow::with_max(fan.dim(), max),
        None => DegreeWindow::default_for(fan.dim()),
    }
}

fn cone_label(fan: &Fan, c: ConeId) -> String {
    let rays: Vec<String> = fan.cone(c).rays.iter().map(usize::to_string).collect();
    format!("{c}[{}]", rays.join(","))
}

fn load_fan(path: &std::path::Path) -> Result<Arc<Fan>> {
    Ok(Arc::new(read_fan(path)?.fan))
}

fn load_map(target: &std::path::Path, source: &std::path::Path) -> Result<FanMap> {
    let target = load_fan(target)?;
    let file = read_fan(source)?;
    let map = subdivision_map_with(Arc::new(file.fan), target, &file.map)?;
    if !map.proper {
        return Err(Error::NotProper("the subdivision does not cover the target fan".into()));
    }
    Ok(map)
}

fn stalk_records(report: &mut Report, object: &str, m: &FanComplex) {
    for (c, gens) in StalkReport::of(m).stalks {
        for (d, count) in multiset(&gens) {
            report.push(record(object, cone_label(&m.fan, c), d, count, "-"));
        }
    }
}

fn multiset(gens: &[i32]) -> Vec<(i32, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for &g in gens {
        *counts.entry(g).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}

fn degrees_text(gens: &[i32]) -> String {
    let v: Vec<String> = gens.iter().map(i32::to_string).collect();
    format!("{{{}}}", v.join(","))
}

/// Runs one command.
pub fn run(cli: &Cli) -> Result<Report> {
    let common = &cli.common;
    let mut report = Report::new();
    match &cli.command {
        Command::Fan { action: FanAction::Check { fan } } => {
            let file = read_fan(fan)?;
            let f = &file.fan;
            report.push(record("dim", "-", "-", f.dim(), "-"));
            report.push(record("rays", "-", "-", f.rays().len(), "-"));
            report.push(record("cones", "-", "-", f.len(), "-"));
            report.push(record("complete", "-", "-", f.is_complete(), "-"));
            report.push(record("simplicial", "-", "-", f.is_simplicial(), "-"));
            if f.had_nonprimitive_rays() {
                report.push(record("warning", "-", "-", "non-primitive rays were normalized", "-"));
            }
            report.check("fan", "-", true, "valid");
        }
        Command::Minimal { action: MinimalAction::Build { fan } } => {
            let f = load_fan(fan)?;
            let w = window(&f, common);
            report.push(window_record(w));
            let k = build_minimal(f.clone(), BuildOptions::new(w))?;
            let m = verify_minimality(&k.complex, w);
            stalk_records(&mut report, "stalk", &k.complex);
            report.check("d^2=0", "-", m.complex_ok, "");
            report.check("locally_free", "-", m.locally_free, "");
            report.check("locally_exact", "-", m.not_exact.is_empty(), format!("{:?}", m.not_exact));
            report.check("minimal", "-", m.not_minimal.is_empty() && m.base_ok, format!("{:?}", m.not_minimal));
            report.artifact = Some(write_complex(&k.complex));
        }
        Command::Stalks { fan } => {
            let f = load_fan(fan)?;
            let w = window(&f, common);
            report.push(window_record(w));
            let k = build_minimal(f.clone(), BuildOptions::new(w))?;
            for c in f.cones() {
                let got = k.complex.generators(c.id).to_vec();
                let (expected, ok) = match predicted_stalk(&f, c.id) {
                    Ok(p) => {
                        let ok = p == got;
                        (degrees_text(&p), ok)
                    }
                    Err(e) => (e.to_string(), false),
                };
                report.ok &= ok;
                let cert = if ok { "MATCH" } else { "MISMATCH" };
                report.push(record("stalk", cone_label(&f, c.id), "-", format!("{} oracle {}", degrees_text(&got), expected), cert));
            }
        }
        Command::Ih { fan } => {
            let f = load_fan(fan)?;
            let w = window(&f, common);
            report.push(window_record(w));
            let k = build_minimal(f.clone(), BuildOptions::new(w))?;
            let ih = ih_module(&k)?;
            for (d, count) in multiset(&ih) {
                report.push(record("ih", "-", d, count, "-"));
            }
            match h_vector(&f) {
                Ok(h) => {
                    let ok = predicted_ih(&f)? == ih;
                    report.ok &= ok;
                    let hv: Vec<String> = h.iter().map(i64::to_string).collect();
                    let cert = if ok { "MATCH" } else { "MISMATCH" };
                    report.push(record("h_oracle", "-", "-", format!("({})", hv.join(",")), cert));
                }
                Err(_) => match predicted_ih_toric(&f) {
                    Ok(p) => {
                        let ok = p == ih;
                        report.ok &= ok;
                        let cert = if ok { "MATCH" } else { "MISMATCH" };
                        report.push(record("toric_h_oracle", "-", "-", degrees_text(&p), cert));
                    }
                    Err(_) => report.push(record("h_oracle", "-", "-", "fan is not complete", "SKIPPED")),
                },
            }
        }
        Command::Pushforward { fan, subdivision } => {
            let map = load_map(fan, subdivision)?;
            let w = window(&map.target, common);
            report.push(window_record(w));
            let k = build_minimal(map.source.clone(), BuildOptions::new(w))?;
            let p = pushforward(&map, &k.complex, w)?;
            let cert = verify_pushforward(&p);
            stalk_records(&mut report, "stalk", &p.complex);
            report.check("d^2=0", "-", cert.complex_ok, "");
            report.check("locally_free", "-", cert.locally_free, "");
            report.check("locally_exact", "-", cert.not_exact.is_empty(), format!("{:?}", cert.not_exact));
            report.check("subcomplex", "-", cert.subcomplex, "");
            report.check("quasi_isomorphism", "-", cert.not_quasi_isomorphic.is_empty(), format!("{:?}", cert.not_quasi_isomorphic));
            report.artifact = Some(write_complex(&p.complex));
        }
        Command::Decompose { fan, subdivision } => {
            let map = load_map(fan, subdivision)?;
            let w = window(&map.target, common);
            report.push(window_record(w));
            let r = decomposition_theorem_report(&map, w)?;
            for (&(c, k), &mult) in &r.multiplicities {
                report.push(record("summand", cone_label(&map.target, c), k, mult, "-"));
            }
            report.check("pushforward", "-", r.pushforward.passes(), "");
            report.check("routes_agree", "-", r.check.routes_agree, "greedy vs peeled");
            report.check("summands_match", "-", r.check.summands_match, "");
            report.check("parts_valid", "-", r.check.parts_valid && r.check.exhausted, "split parts and complements");
            report.check("base", map.target.origin_id(), r.base_ok, "K appears once at the origin");
        }
        Command::Verify { complex } => {
            let m = parse_complex(&std::fs::read_to_string(complex)?)?;
            let fan = m.fan.clone();
            let w = window(&fan, common);
            report.push(window_record(w));
            stalk_records(&mut report, "stalk", &m);
            let d2 = m.check_complex();
            report.check("d^2=0", "-", d2.is_ok(), d2.err().map(|e| e.to_string()).unwrap_or_default());
            report.check("locally_free", "-", m.check_locally_free(), "");
            let exact = m.check_locally_exact(w);
            report.check("locally_exact", "-", exact.is_empty(), format!("{exact:?}"));
            let min = verify_minimality(&m, w);
            // informational only
            report.push(record("minimal", "-", "-", format!("{:?}", min.not_minimal), if min.passes() { "yes" } else { "no" }));
        }
    }
    Ok(report)
}

/// Runs the command and writes its output; returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let format = cli.common.format;
    let result = run(&cli).and_then(|report| {
        let text = report.render(format);
        match (&cli.common.out, &report.artifact) {
            (Some(path), Some(artifact)) => {
                std::fs::write(path, artifact)?;
                print!("{text}");
            }
            (Some(path), None) => std::fs::write(path, &text)?,
            (None, Some(artifact)) if format == Format::Human => print!("{artifact}\n{text}"),
            (None, _) => print!("{text}"),
        }
        Ok(report.ok)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
