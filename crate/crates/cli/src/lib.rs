//! `omlprob` command line: one library operation per invocation.
//!
//! Exit status is 0 on success (negative verdicts included), 1 when an input
//! fails validation or a property check fails, 2 on usage errors and
//! unreadable inputs.

use std::collections::BTreeMap;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use omlprob::causality::{
    classical_granger_lag1, fit_smap_from_experiments, granger_causes, Cell, ExperimentOrder, CLASSICAL_LABEL,
};
use omlprob::generate::{random_horizontal_sum, random_smap, RandomSpec};
use omlprob::io::{
    read_source, resolve_lattice, DocumentKind, IoError, LatticeDocument, LatticeRef, LoadedLattice,
    ObservableDocument, Report, SMapDocument, Source, WorkspaceDocument,
};
use omlprob::lattice::{ElementId, FiniteOml};
use omlprob::observable::{check_oplus_properties, conditional_expectation, oplus, Observable};
use omlprob::rational::{format_rational, parse_rational, Rational};
use omlprob::state::{CausalityReport, Classification, PropertyReport, SMap};

#[derive(Parser, Debug)]
#[command(name = "omlprob", version, about = "Exact probability on finite orthomodular lattices")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate any document; lattices get a block and horizontal-sum summary.
    Validate {
        file: String,
        #[arg(long)]
        lattice: Option<String>,
    },
    /// List the blocks of a lattice.
    Blocks { lattice: String },
    /// One lattice: horizontal-sum check. Several Boolean lattices: their horizontal sum.
    Hsum {
        #[arg(required = true)]
        files: Vec<String>,
    },
    #[command(subcommand)]
    Smap(SmapCommand),
    /// Conditional state derived from an s-map.
    Cond {
        #[command(flatten)]
        input: SmapInput,
        /// Only this conditioning element.
        #[arg(long)]
        given: Option<String>,
    },
    /// Expectation and distribution of an observable.
    Expect {
        #[command(flatten)]
        input: SmapInput,
        #[arg(long)]
        obs: String,
    },
    /// Conditional expectation onto the range of another observable.
    Condexpect {
        #[command(flatten)]
        input: SmapInput,
        #[arg(long)]
        obs: String,
        /// Observable whose range is the conditioning subalgebra.
        #[arg(long)]
        given: String,
    },
    /// Summability operator on two observables, with its property checks.
    Oplus {
        #[command(flatten)]
        input: SmapInput,
        /// Pass twice: x, then y.
        #[arg(long, num_args = 1, required = true)]
        obs: Vec<String>,
        /// Observable whose range is used for the subalgebra variant.
        #[arg(long)]
        within: Option<String>,
    },
    #[command(subcommand)]
    Obs(ObsCommand),
    #[command(subcommand)]
    Granger(GrangerCommand),
}

#[derive(Args, Debug)]
struct SmapInput {
    #[arg(long)]
    smap: String,
    /// Overrides the lattice referenced by the s-map file.
    #[arg(long)]
    lattice: Option<String>,
}

#[derive(Subcommand, Debug)]
enum SmapCommand {
    /// Check the s-map axioms.
    Validate(SmapInput),
    /// Symmetric, causal or strongly causal, with witnesses.
    Classify(SmapInput),
    /// p1-p4, marginal identity and Jauch-Piron.
    Properties(SmapInput),
    /// Random s-map on a random horizontal sum.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the document here instead of embedding it in the report.
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum ObsCommand {
    /// Check an observable; with --smap also its distribution under mu_p.
    Validate {
        #[arg(long)]
        obs: String,
        #[arg(long)]
        lattice: Option<String>,
        #[arg(long)]
        smap: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum GrangerCommand {
    /// Fit an s-map on a two-cell process lattice from two experiments.
    Fit {
        #[arg(long)]
        lattice: String,
        /// Counts with xi measured first (`first,second,count`).
        #[arg(long = "xi-first")]
        xi_first: String,
        /// Counts with eta measured first.
        #[arg(long = "eta-first")]
        eta_first: String,
        /// Largest tolerated marginal disagreement.
        #[arg(long, default_value = "0")]
        tol: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Does the cause cell change the distribution of the effect cell?
    Test {
        #[command(flatten)]
        input: SmapInput,
        #[arg(long)]
        cause: String,
        #[arg(long)]
        effect: String,
    },
    /// Lag-1 residual-variance comparison on a `t,x,y` series.
    Classic { series: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        if e.is_unreadable() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

macro_rules! invalid {
    ($e:expr) => {
        $e.map_err(|e| Failure::Invalid(e.to_string()))
    };
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let command: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { stdout: text, stderr: String::new(), exit_code: 0 }
            } else {
                Outcome { stdout: String::new(), stderr: text, exit_code: 2 }
            };
        }
    };
    let mut report = Report::new(command.clone());
    let result = dispatch(&cli.command, &mut report);
    match result {
        Ok(()) => Outcome {
            stdout: if cli.json { report.to_json() } else { report.to_text() },
            stderr: String::new(),
            exit_code: report.exit_code,
        },
        Err(failure) => {
            let (code, message) = match failure {
                Failure::Usage(m) => (2, m),
                Failure::Invalid(m) => (1, m),
            };
            let mut err = Report::new(command);
            err.exit_code = code;
            err.summary = format!("error: {message}");
            err.fact("error", message.clone());
            if cli.json {
                Outcome { stdout: err.to_json(), stderr: String::new(), exit_code: code }
            } else {
                Outcome { stdout: String::new(), stderr: format!("error: {message}\n"), exit_code: code }
            }
        }
    }
}

fn dispatch(command: &Command, r: &mut Report) -> Result<(), Failure> {
    match command {
        Command::Validate { file, lattice } => validate(file, lattice.as_deref(), r),
        Command::Blocks { lattice } => {
            let loaded = load_lattice_file(lattice)?;
            let l = loaded.oml();
            r.summary = format!("{} blocks", l.blocks().len());
            r.fact("blocks", blocks_json(l));
            Ok(())
        }
        Command::Hsum { files } => hsum(files, r),
        Command::Smap(SmapCommand::Validate(input)) => {
            let (loaded, doc) = load_smap_input(input)?;
            let p = build_smap(&doc, loaded.oml())?;
            smap_summary(&p, r);
            Ok(())
        }
        Command::Smap(SmapCommand::Classify(input)) => {
            let (loaded, doc) = load_smap_input(input)?;
            let p = build_smap(&doc, loaded.oml())?;
            classification_report(&p.classify(), p.lattice(), r);
            Ok(())
        }
        Command::Smap(SmapCommand::Properties(input)) => {
            let (loaded, doc) = load_smap_input(input)?;
            let p = build_smap(&doc, loaded.oml())?;
            property_report(&p.check_properties(), "s-map property checks", r);
            Ok(())
        }
        Command::Smap(SmapCommand::Generate { seed, out }) => generate(*seed, out.as_deref(), r),
        Command::Cond { input, given } => cond(input, given.as_deref(), r),
        Command::Expect { input, obs } => {
            let (loaded, doc) = load_smap_input(input)?;
            let p = build_smap(&doc, loaded.oml())?;
            let x = load_observable(obs, p.lattice())?;
            let e = x.expectation(&p);
            r.summary = format!("E_p(x) = {}", format_rational(&e));
            r.fact("expectation", format_rational(&e));
            r.fact("distribution", distribution_json(&x, &p));
            Ok(())
        }
        Command::Condexpect { input, obs, given } => {
            let (loaded, doc) = load_smap_input(input)?;
            let p = build_smap(&doc, loaded.oml())?;
            let l = p.lattice();
            let x = load_observable(obs, l)?;
            let b = load_observable(given, l)?.range();
            let z = invalid!(conditional_expectation(&p, &x, &b))?;
            let ez = z.observable.expectation(&p);
            r.summary = format!("E_p(x|B) = {}", support_text(&z.observable));
            r.fact("conditional_expectation", support_json(&z.observable));
            r.fact("subalgebra_atoms", names(l, b.atoms()));
            r.fact("zero_mass_atoms", names(l, &z.zero_mass_atoms));
            r.fact("expectation", format_rational(&ez));
            r.fact("tower", ez == x.expectation(&p));
            Ok(())
        }
        Command::Oplus { input, obs, within } => oplus_command(input, obs, within.as_deref(), r),
        Command::Obs(ObsCommand::Validate { obs, lattice, smap }) => {
            obs_validate(obs, lattice.as_deref(), smap.as_deref(), r)
        }
        Command::Granger(GrangerCommand::Fit { lattice, xi_first, eta_first, tol, out }) => {
            granger_fit(lattice, xi_first, eta_first, tol, out.as_deref(), r)
        }
        Command::Granger(GrangerCommand::Test { input, cause, effect }) => granger_test(input, cause, effect, r),
        Command::Granger(GrangerCommand::Classic { series }) => granger_classic(series, r),
    }
}

fn names(l: &FiniteOml, elements: &[ElementId]) -> Value {
    elements.iter().map(|&e| l.name(e)).collect::<Vec<_>>().into()
}

fn q(v: &Rational) -> Value {
    Value::String(format_rational(v))
}

fn blocks_json(l: &FiniteOml) -> Value {
    l.blocks()
        .iter()
        .map(|b| json!({ "size": b.members.len(), "atoms": names(l, &b.atoms), "members": names(l, &b.members) }))
        .collect::<Vec<_>>()
        .into()
}

fn support_json(x: &Observable<'_>) -> Value {
    let l = x.lattice();
    x.support()
        .iter()
        .map(|(v, e)| json!({ "value": q(v), "element": l.name(*e) }))
        .collect::<Vec<_>>()
        .into()
}

fn support_text(x: &Observable<'_>) -> String {
    let l = x.lattice();
    let parts: Vec<String> = x
        .support()
        .iter()
        .map(|(v, e)| format!("({}, {})", format_rational(v), l.name(*e)))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn distribution_json(x: &Observable<'_>, p: &SMap<'_>) -> Value {
    x.distribution(&p.mu())
        .iter()
        .map(|(v, w)| json!({ "value": q(v), "probability": q(w) }))
        .collect::<Vec<_>>()
        .into()
}

fn load_lattice_file(path: &str) -> Result<LoadedLattice, Failure> {
    Ok(omlprob::io::load_lattice(path, None)?)
}

fn load_smap_input(input: &SmapInput) -> Result<(LoadedLattice, SMapDocument), Failure> {
    let source = read_source(&input.smap, None)?;
    let doc = match source.expect(DocumentKind::SMap)? {
        WorkspaceDocument::SMap(d) => d,
        _ => unreachable!("kind checked"),
    };
    let loaded = resolve_lattice(input.lattice.as_deref(), doc.lattice.as_ref(), source.dir())?;
    Ok((loaded, doc))
}

fn build_smap<'a>(doc: &SMapDocument, l: &'a FiniteOml) -> Result<SMap<'a>, Failure> {
    Ok(doc.build(l)?)
}

fn observable_doc(path: &str) -> Result<(Source, ObservableDocument), Failure> {
    let source = read_source(path, None)?;
    match source.expect(DocumentKind::Observable)? {
        WorkspaceDocument::Observable(d) => Ok((source, d)),
        _ => unreachable!("kind checked"),
    }
}

fn load_observable<'a>(path: &str, l: &'a FiniteOml) -> Result<Observable<'a>, Failure> {
    Ok(observable_doc(path)?.1.build(l)?)
}

fn lattice_facts(loaded: &LoadedLattice, r: &mut Report) {
    let l = loaded.oml();
    let check = l.horizontal_sum_check();
    r.summary = format!(
        "valid OML, {} blocks, horizontal sum: {}",
        l.blocks().len(),
        if check.is_horizontal_sum { "yes" } else { "no" }
    );
    r.fact("elements", l.len());
    r.fact("atoms", names(l, l.atoms()));
    r.fact("boolean", l.is_boolean());
    r.fact("blocks", blocks_json(l));
    r.fact("horizontal_sum", check.is_horizontal_sum);
    r.fact(
        "horizontal_sum_witness",
        match &check.witness {
            None => Value::Null,
            Some((i, j, common)) => json!({ "blocks": [i, j], "intersection": names(l, common) }),
        },
    );
    if let Some(pl) = loaded.process() {
        r.fact("cells", pl.cells().iter().map(|c| c.to_string()).collect::<Vec<_>>());
    }
}

fn validate(file: &str, lattice: Option<&str>, r: &mut Report) -> Result<(), Failure> {
    let source = read_source(file, None)?;
    match source.parse()? {
        WorkspaceDocument::Lattice(d) => lattice_facts(&d.build()?, r),
        WorkspaceDocument::SMap(d) => {
            let loaded = resolve_lattice(lattice, d.lattice.as_ref(), source.dir())?;
            let p = build_smap(&d, loaded.oml())?;
            smap_summary(&p, r);
        }
        WorkspaceDocument::Observable(d) => {
            let loaded = resolve_lattice(lattice, d.lattice.as_ref(), source.dir())?;
            let x = d.build(loaded.oml())?;
            observable_facts(&x, r);
        }
        WorkspaceDocument::Experiment(d) => {
            d.to_counts(ExperimentOrder::XiThenEta)?;
            let total: u64 = d.rows.iter().map(|row| row.count).sum();
            if total == 0 {
                return Err(Failure::Invalid("experiment has no observations".into()));
            }
            r.summary = format!("valid experiment counts, {} cells, {} observations", d.rows.len(), total);
            r.fact("cells", d.rows.len());
            r.fact("observations", total);
        }
        WorkspaceDocument::TimeSeries(d) => {
            let (x, _) = d.series()?;
            r.summary = format!("valid time series, {} observations", x.len());
            r.fact("observations", x.len());
        }
    }
    Ok(())
}

fn hsum(files: &[String], r: &mut Report) -> Result<(), Failure> {
    if let [single] = files {
        lattice_facts(&load_lattice_file(single)?, r);
        return Ok(());
    }
    let parts = files
        .iter()
        .map(|f| load_lattice_file(f).map(|l| l.oml().clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let sum = invalid!(FiniteOml::horizontal_sum(&parts))?;
    lattice_facts(&LoadedLattice::Plain(sum.clone()), r);
    r.summary = format!("horizontal sum of {} blocks, {} elements", parts.len(), sum.len());
    r.fact("document", WorkspaceDocument::Lattice(LatticeDocument::from_oml(&sum)).to_json_value());
    Ok(())
}

fn smap_summary(p: &SMap<'_>, r: &mut Report) {
    let l = p.lattice();
    let marginal: serde_json::Map<String, Value> =
        l.atoms().iter().map(|&a| (l.name(a).to_string(), q(p.mass(a)))).collect();
    r.summary = format!("valid s-map on {} elements", l.len());
    r.fact("elements", l.len());
    r.fact("marginal", Value::Object(marginal));
    r.fact("symmetric", p.is_symmetric());
}

fn classification_text(c: Classification) -> &'static str {
    match c {
        Classification::Symmetric => "symmetric",
        Classification::Causal => "causal, not strongly causal",
        Classification::StronglyCausal => "strongly causal",
    }
}

fn classification_report(c: &CausalityReport, l: &FiniteOml, r: &mut Report) {
    r.summary = classification_text(c.classification).to_string();
    r.fact("classification", c.classification.as_str());
    r.fact(
        "causal_witnesses",
        c.causal_witnesses
            .iter()
            .map(|w| json!({ "a": l.name(w.a), "b": l.name(w.b), "p(a,b)": q(&w.p_ab), "p(b,a)": q(&w.p_ba) }))
            .collect::<Vec<_>>(),
    );
    r.fact(
        "one_way_witnesses",
        c.dependence_witnesses
            .iter()
            .map(|w| {
                json!({
                    "dependent": l.name(w.dependent),
                    "on": l.name(w.on),
                    "p(dependent,on)": q(&w.p_dependent),
                    "mu(dependent)mu(on)": q(&w.product),
                    "p(on,dependent)": q(&w.p_independent),
                    "independent(dependent,on)": false,
                    "independent(on,dependent)": true,
                })
            })
            .collect::<Vec<_>>(),
    );
    r.fact("indeterminate_pairs", c.indeterminate_pairs);
    r.fact(
        "jauch_piron_pairs",
        c.jauch_piron_notes
            .iter()
            .map(|&(a, b)| json!([l.name(a), l.name(b)]))
            .collect::<Vec<_>>(),
    );
}

fn property_report(report: &PropertyReport, what: &str, r: &mut Report) {
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    r.summary = if failed == 0 {
        format!("{what}: all {} passed", report.checks.len())
    } else {
        format!("{what}: {failed} of {} failed", report.checks.len())
    };
    r.fact(
        "checks",
        report
            .checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "statement": c.statement,
                    "passed": c.passed,
                    "checked": c.checked,
                    "witness": c.witness,
                })
            })
            .collect::<Vec<_>>(),
    );
    if failed > 0 {
        r.exit_code = 1;
    }
}

fn generate(seed: u64, out: Option<&str>, r: &mut Report) -> Result<(), Failure> {
    let spec = RandomSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = random_horizontal_sum(&mut rng, &spec);
    let p = random_smap(&mut rng, &l, &spec);
    let lattice = LatticeRef::Inline(Box::new(LatticeDocument::from_oml(&l)));
    let doc = WorkspaceDocument::SMap(SMapDocument::from_smap(&p, Some(lattice)));
    r.summary = format!(
        "generated s-map on a horizontal sum of {} blocks ({} elements), seed {seed}",
        l.blocks().len(),
        l.len()
    );
    r.fact("seed", seed);
    r.fact("blocks", l.blocks().len());
    r.fact("elements", l.len());
    r.fact("classification", p.classify().classification.as_str());
    write_or_embed(&doc, out, r)
}

fn write_or_embed(doc: &WorkspaceDocument, out: Option<&str>, r: &mut Report) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, doc.to_text()).map_err(|e| Failure::Usage(format!("cannot write {path}: {e}")))?;
            r.fact("written", path);
        }
        None => {
            r.fact("document", doc.to_json_value());
        }
    }
    Ok(())
}

fn cond(input: &SmapInput, given: Option<&str>, r: &mut Report) -> Result<(), Failure> {
    let (loaded, doc) = load_smap_input(input)?;
    let p = build_smap(&doc, loaded.oml())?;
    let l = p.lattice();
    let f = invalid!(p.conditional(&BTreeMap::new()))?;
    let conditioners: Vec<ElementId> = match given {
        Some(name) => vec![invalid!(l.require(name))?],
        None => l.elements().filter(|&b| b != l.bottom()).collect(),
    };
    let rows: Vec<Value> = conditioners
        .iter()
        .map(|&b| {
            let values: serde_json::Map<String, Value> = l
                .elements()
                .filter_map(|a| f.get(a, b).map(|v| (l.name(a).to_string(), q(v))))
                .collect();
            json!({ "given": l.name(b), "values": values })
        })
        .collect();
    let back = invalid!(f.to_smap())?;
    let round_trip = l
        .elements()
        .filter(|&b| !num_traits::Zero::is_zero(p.mass(b)))
        .all(|b| l.elements().all(|a| back.get(a, b) == p.get(a, b)));
    r.summary = format!("conditional state on {} conditioners", rows.len());
    r.fact("conditional", rows);
    r.fact(
        "fallbacks",
        f.fallbacks()
            .iter()
            .map(|u| json!({ "conditioner": l.name(u.conditioner), "source": format!("{:?}", u.source).to_lowercase() }))
            .collect::<Vec<_>>(),
    );
    r.fact("round_trip", round_trip);
    if !round_trip {
        r.exit_code = 1;
    }
    Ok(())
}

fn oplus_command(input: &SmapInput, obs: &[String], within: Option<&str>, r: &mut Report) -> Result<(), Failure> {
    let [x_path, y_path] = obs else {
        return Err(Failure::Usage(format!("oplus takes --obs twice (x, then y), got {}", obs.len())));
    };
    let (loaded, doc) = load_smap_input(input)?;
    let p = build_smap(&doc, loaded.oml())?;
    let l = p.lattice();
    let x = load_observable(x_path, l)?;
    let y = load_observable(y_path, l)?;
    let b = within.map(|w| load_observable(w, l).map(|z| z.range())).transpose()?;
    let s = invalid!(oplus(&p, &x, &y))?;
    let checks = invalid!(check_oplus_properties(&p, &x, &y, b.as_ref()))?;
    let header = format!("oplus_p(x, y) = {}", support_text(&s.observable));
    property_report(&checks, "oplus property checks", r);
    r.summary = format!("{header}; {}", r.summary);
    r.facts.insert(0, ("oplus".into(), support_json(&s.observable)));
    r.facts.insert(1, ("expectation".into(), q(&s.observable.expectation(&p))));
    r.facts.insert(2, ("zero_mass_atoms".into(), names(l, &s.zero_mass_atoms)));
    Ok(())
}

fn observable_facts(x: &Observable<'_>, r: &mut Report) {
    let l = x.lattice();
    r.summary = format!("valid observable, spectrum {{{}}}", x.spectrum().iter().map(format_rational).collect::<Vec<_>>().join(", "));
    r.fact("support", support_json(x));
    r.fact("spectrum", x.spectrum().iter().map(q).collect::<Vec<_>>());
    r.fact("range", names(l, x.range().elements()));
}

fn obs_validate(obs: &str, lattice: Option<&str>, smap: Option<&str>, r: &mut Report) -> Result<(), Failure> {
    let (source, doc) = observable_doc(obs)?;
    match smap {
        Some(smap) => {
            let input = SmapInput { smap: smap.to_string(), lattice: lattice.map(str::to_string) };
            let (loaded, sdoc) = load_smap_input(&input)?;
            let p = build_smap(&sdoc, loaded.oml())?;
            let x = doc.build(p.lattice())?;
            observable_facts(&x, r);
            r.fact("distribution", distribution_json(&x, &p));
        }
        None => {
            let loaded = resolve_lattice(lattice, doc.lattice.as_ref(), source.dir())?;
            let x = doc.build(loaded.oml())?;
            observable_facts(&x, r);
        }
    }
    Ok(())
}

fn experiment(path: &str, order: ExperimentOrder) -> Result<omlprob::causality::ExperimentCounts, Failure> {
    match read_source(path, None)?.expect(DocumentKind::Experiment)? {
        WorkspaceDocument::Experiment(d) => Ok(d.to_counts(order)?),
        _ => unreachable!("kind checked"),
    }
}

fn granger_fit(
    lattice: &str,
    xi_first: &str,
    eta_first: &str,
    tol: &str,
    out: Option<&str>,
    r: &mut Report,
) -> Result<(), Failure> {
    let tol = parse_rational(tol).map_err(|e| Failure::Usage(format!("--tol: {e}")))?;
    let loaded = load_lattice_file(lattice)?;
    let pl = loaded
        .process()
        .ok_or_else(|| Failure::Invalid(format!("{lattice} is not a process lattice")))?;
    let e1 = experiment(xi_first, ExperimentOrder::XiThenEta)?;
    let e2 = experiment(eta_first, ExperimentOrder::EtaThenXi)?;
    let fitted = invalid!(fit_smap_from_experiments(pl, &e1, &e2, &tol))?;
    let l = pl.lattice();
    let xi = &pl.cells()[fitted.xi_cell];
    let eta = &pl.cells()[fitted.eta_cell];
    r.summary = format!(
        "fitted s-map, xi = {xi}, eta = {eta}, marginals {}",
        if fitted.reconciled() { "reconciled within tolerance" } else { "consistent" }
    );
    r.fact("xi", xi.to_string());
    r.fact("eta", eta.to_string());
    r.fact("tolerance", q(&tol));
    r.fact(
        "marginals",
        fitted
            .marginals
            .iter()
            .map(|(a, first, second)| json!({ "atom": l.name(*a), "measured_first": q(first), "measured_second": q(second) }))
            .collect::<Vec<_>>(),
    );
    r.fact("reconciled", fitted.reconciled());
    r.fact("classification", fitted.smap.classify().classification.as_str());
    let lattice_ref = Path::new(lattice).file_name().and_then(|n| n.to_str()).unwrap_or(lattice);
    let doc = WorkspaceDocument::SMap(SMapDocument::from_smap(&fitted.smap, Some(LatticeRef::Path(lattice_ref.into()))));
    write_or_embed(&doc, out, r)
}

fn granger_test(input: &SmapInput, cause: &str, effect: &str, r: &mut Report) -> Result<(), Failure> {
    let cause = Cell::parse(cause).map_err(|e| Failure::Usage(e.to_string()))?;
    let effect = Cell::parse(effect).map_err(|e| Failure::Usage(e.to_string()))?;
    let (loaded, doc) = load_smap_input(input)?;
    let pl = loaded
        .process()
        .ok_or_else(|| Failure::Invalid("granger test needs a process lattice (pass --lattice)".into()))?;
    let p = build_smap(&doc, pl.lattice())?;
    let v = invalid!(granger_causes(pl, &p, &effect, &cause))?;
    let l = pl.lattice();
    r.summary = format!(
        "{cause} causes {effect}: {} ({} witnesses)",
        if v.causes { "yes" } else { "no" },
        v.witnesses.len()
    );
    r.fact("causes", v.causes);
    r.fact("direction", json!({ "cause": cause.to_string(), "effect": effect.to_string() }));
    r.fact(
        "witnesses",
        v.witnesses
            .iter()
            .map(|w| {
                json!({
                    "effect_event": l.name(w.effect_event),
                    "conditioning_event": l.name(w.conditioning_event),
                    "conditional": q(&w.conditional),
                    "unconditional": q(&w.unconditional),
                })
            })
            .collect::<Vec<_>>(),
    );
    r.fact(
        "annotations",
        v.zero_mass_conditioners
            .iter()
            .map(|&b| json!({ "zero_mass_conditioner": l.name(b) }))
            .collect::<Vec<_>>(),
    );
    Ok(())
}

fn granger_classic(series: &str, r: &mut Report) -> Result<(), Failure> {
    let (x, y) = match read_source(series, None)?.expect(DocumentKind::TimeSeries)? {
        WorkspaceDocument::TimeSeries(d) => d.series()?,
        _ => unreachable!("kind checked"),
    };
    let report = invalid!(classical_granger_lag1(&x, &y))?;
    r.summary = format!(
        "x causes y (lag 1, variance form): {}; {CLASSICAL_LABEL}",
        if report.verdict { "yes" } else { "no" }
    );
    r.fact("label", CLASSICAL_LABEL);
    r.fact("observations", report.observations);
    r.fact("sigma2_restricted", q(&report.restricted_variance));
    r.fact("sigma2_full", q(&report.full_variance));
    r.fact("rss_restricted", q(&report.restricted_rss));
    r.fact("rss_full", q(&report.full_rss));
    r.fact("coefficients_restricted", report.restricted_coefficients.iter().map(q).collect::<Vec<_>>());
    r.fact("coefficients_full", report.full_coefficients.iter().map(q).collect::<Vec<_>>());
    r.fact("verdict", report.verdict);
    Ok(())
}
