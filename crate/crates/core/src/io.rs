//! Documents on disk and the report shape shared by the command line.
//!
//! JSON documents: lattices (`explicit`, `horizontal_sum`, `process`),
//! s-maps (`atom_table` + `marginal`, or `full_table`) and observables.
//! CSV documents: experiment counts (`first,second,count`) and time series
//! (`t,x,y`). The kind is read off the JSON shape or the CSV header.
//!
//! File references are resolved against the referencing document's
//! directory, then `$OMLPROB_FIXTURES`, then the fixtures bundled into the
//! crate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::causality::{CausalityError, Cell, ExperimentCounts, ExperimentOrder, ProcessLattice};
use crate::lattice::{ElementId, FiniteOml, LatticeError, RawOml};
use crate::observable::{Observable, ObservableError};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::state::{SMap, SMapError, State, StateError};

pub const SCHEMA_VERSION: &str = "1";
pub const FIXTURES_ENV: &str = "OMLPROB_FIXTURES";

const BUNDLED: &[(&str, &str)] = &[
    ("l1.json", include_str!("../fixtures/l1.json")),
    ("l2.json", include_str!("../fixtures/l2.json")),
    ("p1_smap.json", include_str!("../fixtures/p1_smap.json")),
    ("p2_smap.json", include_str!("../fixtures/p2_smap.json")),
    ("p1_process.json", include_str!("../fixtures/p1_process.json")),
    ("exp_xi_first.csv", include_str!("../fixtures/exp_xi_first.csv")),
    ("exp_eta_first.csv", include_str!("../fixtures/exp_eta_first.csv")),
    ("exp_eta_first_shifted.csv", include_str!("../fixtures/exp_eta_first_shifted.csv")),
    ("obs_a.json", include_str!("../fixtures/obs_a.json")),
    ("obs_b.json", include_str!("../fixtures/obs_b.json")),
    ("obs_a_weighted.json", include_str!("../fixtures/obs_a_weighted.json")),
    ("obs_p2_y.json", include_str!("../fixtures/obs_p2_y.json")),
    ("ts_lagged.csv", include_str!("../fixtures/ts_lagged.csv")),
    ("ts_noise.csv", include_str!("../fixtures/ts_noise.csv")),
];

pub fn bundled_fixture(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn bundled_fixture_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{source_name}: unknown document kind ({hint})")]
    UnknownKind { source_name: String, hint: String },
    #[error("{source_name}: unsupported schema_version {version:?} (supported: {SCHEMA_VERSION})")]
    SchemaVersionUnsupported { source_name: String, version: String },
    #[error("{source_name}: expected a {expected} document, found {found}")]
    WrongKind {
        source_name: String,
        expected: DocumentKind,
        found: DocumentKind,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("no lattice given: pass --lattice or reference one from the document")]
    MissingLattice,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    SMap(#[from] SMapError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Causality(#[from] CausalityError),
}

impl IoError {
    /// Could not get at the input at all, as opposed to input that was read
    /// and found wanting.
    pub fn is_unreadable(&self) -> bool {
        matches!(self, IoError::Read { .. })
    }
}

fn field_error(field: impl Into<String>, message: impl ToString) -> IoError {
    IoError::Field { field: field.into(), message: message.to_string() }
}

fn parse_field(field: impl Into<String>, text: &str) -> Result<Rational, IoError> {
    parse_rational(text).map_err(|e| field_error(field, e))
}

fn default_version() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Lattice,
    SMap,
    Observable,
    Experiment,
    TimeSeries,
}

impl std::fmt::Display for DocumentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DocumentKind::Lattice => "lattice",
            DocumentKind::SMap => "smap",
            DocumentKind::Observable => "observable",
            DocumentKind::Experiment => "experiment",
            DocumentKind::TimeSeries => "timeseries",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub atoms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSpec {
    pub series: String,
    pub stamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeSpec {
    Explicit {
        elements: Vec<String>,
        leq: Vec<Vec<bool>>,
        ortho: BTreeMap<String, String>,
    },
    HorizontalSum {
        blocks: Vec<BlockSpec>,
    },
    /// Either explicit `cells`, or the product `series` x `stamps`.
    Process {
        base_atoms: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        series: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        stamps: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        cells: Vec<CellSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeDocument {
    #[serde(default = "default_version")]
    pub schema_version: String,
    #[serde(flatten)]
    pub spec: LatticeSpec,
}

/// A lattice as loaded; process lattices keep their cell structure.
#[derive(Debug, Clone)]
pub enum LoadedLattice {
    Plain(FiniteOml),
    Process(ProcessLattice),
}

impl LoadedLattice {
    pub fn oml(&self) -> &FiniteOml {
        match self {
            LoadedLattice::Plain(l) => l,
            LoadedLattice::Process(pl) => pl.lattice(),
        }
    }

    pub fn process(&self) -> Option<&ProcessLattice> {
        match self {
            LoadedLattice::Plain(_) => None,
            LoadedLattice::Process(pl) => Some(pl),
        }
    }
}

impl LatticeDocument {
    pub fn build(&self) -> Result<LoadedLattice, IoError> {
        match &self.spec {
            LatticeSpec::Explicit { elements, leq, ortho } => {
                let index: BTreeMap<&str, usize> =
                    elements.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
                let mut image = Vec::with_capacity(elements.len());
                for name in elements {
                    let target = ortho
                        .get(name)
                        .ok_or_else(|| field_error(format!("ortho[{name}]"), "missing"))?;
                    let &j = index
                        .get(target.as_str())
                        .ok_or_else(|| field_error(format!("ortho[{name}]"), format!("unknown element {target}")))?;
                    image.push(j);
                }
                if let Some(extra) = ortho.keys().find(|k| !index.contains_key(k.as_str())) {
                    return Err(field_error("ortho", format!("unknown element {extra}")));
                }
                let raw = RawOml { names: elements.clone(), leq: leq.clone(), ortho: image };
                Ok(LoadedLattice::Plain(FiniteOml::validate(&raw)?))
            }
            LatticeSpec::HorizontalSum { blocks } => {
                let parts = blocks
                    .iter()
                    .map(|b| FiniteOml::boolean_algebra(&b.atoms))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(LoadedLattice::Plain(FiniteOml::horizontal_sum(&parts)?))
            }
            LatticeSpec::Process { base_atoms, series, stamps, cells } => {
                let base = FiniteOml::boolean_algebra(base_atoms)?;
                let pl = if cells.is_empty() {
                    ProcessLattice::build(base, stamps, series)?
                } else {
                    if !series.is_empty() || !stamps.is_empty() {
                        return Err(field_error("cells", "give either cells or series/stamps, not both"));
                    }
                    let cells = cells
                        .iter()
                        .map(|c| (Cell::new(&c.series, &c.stamp), c.atoms.clone()))
                        .collect();
                    ProcessLattice::from_cells(base, cells)?
                };
                Ok(LoadedLattice::Process(pl))
            }
        }
    }

    /// Horizontal-sum form when it rebuilds the same lattice, explicit otherwise.
    pub fn from_oml(l: &FiniteOml) -> Self {
        if l.blocks().len() >= 2 && l.is_horizontal_sum() {
            let blocks: Vec<BlockSpec> = l
                .blocks()
                .iter()
                .map(|b| BlockSpec {
                    name: None,
                    atoms: b.atoms.iter().map(|&a| l.name(a).to_string()).collect(),
                })
                .collect();
            let rebuilt = blocks
                .iter()
                .map(|b| FiniteOml::boolean_algebra(&b.atoms))
                .collect::<Result<Vec<_>, _>>()
                .and_then(|parts| FiniteOml::horizontal_sum(&parts));
            if rebuilt.as_ref() == Ok(l) {
                return LatticeDocument {
                    schema_version: default_version(),
                    spec: LatticeSpec::HorizontalSum { blocks },
                };
            }
        }
        let raw = l.to_raw();
        LatticeDocument {
            schema_version: default_version(),
            spec: LatticeSpec::Explicit {
                ortho: raw
                    .names
                    .iter()
                    .zip(&raw.ortho)
                    .map(|(n, &j)| (n.clone(), raw.names[j].clone()))
                    .collect(),
                elements: raw.names,
                leq: raw.leq,
            },
        }
    }
}

/// A lattice given by file reference or inline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeRef {
    Path(String),
    Inline(Box<LatticeDocument>),
}

pub type NamedTable = BTreeMap<String, BTreeMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SMapDocument {
    #[serde(default = "default_version")]
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_table: Option<NamedTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_table: Option<NamedTable>,
}

impl SMapDocument {
    pub fn build<'a>(&self, l: &'a FiniteOml) -> Result<SMap<'a>, IoError> {
        match (&self.atom_table, &self.marginal, &self.full_table) {
            (Some(table), Some(marginal), None) => {
                let atom = |field: String, name: &str| -> Result<ElementId, IoError> {
                    let e = l.require(name)?;
                    if l.atoms().contains(&e) {
                        Ok(e)
                    } else {
                        Err(field_error(field, format!("{name} is not an atom")))
                    }
                };
                let mut weights = BTreeMap::new();
                for (name, v) in marginal {
                    let field = format!("marginal[{name}]");
                    weights.insert(atom(field.clone(), name)?, parse_field(field, v)?);
                }
                let mut values = BTreeMap::new();
                for (row, cols) in table {
                    for (col, v) in cols {
                        let field = format!("atom_table[{row}][{col}]");
                        let key = (atom(field.clone(), row)?, atom(field.clone(), col)?);
                        values.insert(key, parse_field(field, v)?);
                    }
                }
                let m = State::from_atom_weights(l, &weights)?;
                Ok(SMap::from_atom_table(l, &values, &m)?)
            }
            (None, None, Some(table)) => {
                let n = l.len();
                let mut rows = vec![vec![Rational::default(); n]; n];
                for a in l.elements() {
                    let row = table
                        .get(l.name(a))
                        .ok_or_else(|| field_error(format!("full_table[{}]", l.name(a)), "missing row"))?;
                    for b in l.elements() {
                        let field = format!("full_table[{}][{}]", l.name(a), l.name(b));
                        let v = row.get(l.name(b)).ok_or_else(|| field_error(field.clone(), "missing"))?;
                        rows[a.0][b.0] = parse_field(field, v)?;
                    }
                    if let Some(extra) = row.keys().find(|k| l.element(k).is_none()) {
                        return Err(field_error(format!("full_table[{}]", l.name(a)), format!("unknown element {extra}")));
                    }
                }
                if let Some(extra) = table.keys().find(|k| l.element(k).is_none()) {
                    return Err(field_error("full_table", format!("unknown element {extra}")));
                }
                Ok(SMap::validate(l, rows)?)
            }
            _ => Err(field_error(
                "smap",
                "expected either atom_table with marginal, or full_table",
            )),
        }
    }

    /// Atom-table form: every ordered atom pair and the atom marginal.
    pub fn from_smap(p: &SMap<'_>, lattice: Option<LatticeRef>) -> Self {
        let l = p.lattice();
        let atoms = l.atoms();
        let table = atoms
            .iter()
            .map(|&a| {
                let row = atoms
                    .iter()
                    .map(|&b| (l.name(b).to_string(), format_rational(p.get(a, b))))
                    .collect();
                (l.name(a).to_string(), row)
            })
            .collect();
        let marginal = atoms
            .iter()
            .map(|&a| (l.name(a).to_string(), format_rational(p.mass(a))))
            .collect();
        SMapDocument {
            schema_version: default_version(),
            lattice,
            atom_table: Some(table),
            marginal: Some(marginal),
            full_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportEntry {
    pub value: String,
    pub element: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableDocument {
    #[serde(default = "default_version")]
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeRef>,
    pub support: Vec<SupportEntry>,
}

impl ObservableDocument {
    pub fn build<'a>(&self, l: &'a FiniteOml) -> Result<Observable<'a>, IoError> {
        let support = self
            .support
            .iter()
            .enumerate()
            .map(|(i, s)| Ok((parse_field(format!("support[{i}].value"), &s.value)?, l.require(&s.element)?)))
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(Observable::validate(l, support)?)
    }

    pub fn from_observable(x: &Observable<'_>, lattice: Option<LatticeRef>) -> Self {
        let l = x.lattice();
        ObservableDocument {
            schema_version: default_version(),
            lattice,
            support: x
                .support()
                .iter()
                .map(|(v, e)| SupportEntry { value: format_rational(v), element: l.name(*e).to_string() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub first: String,
    pub second: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentDocument {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentDocument {
    /// The file carries no order; it comes from how the file is passed in.
    pub fn to_counts(&self, order: ExperimentOrder) -> Result<ExperimentCounts, IoError> {
        let mut counts = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            if counts.insert((r.first.clone(), r.second.clone()), r.count).is_some() {
                return Err(field_error(format!("row {}", i + 1), format!("duplicate pair ({}, {})", r.first, r.second)));
            }
        }
        Ok(ExperimentCounts { order, counts })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRow {
    pub t: String,
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSeriesDocument {
    pub rows: Vec<TimeRow>,
}

impl TimeSeriesDocument {
    pub fn series(&self) -> Result<(Vec<Rational>, Vec<Rational>), IoError> {
        let mut xs = Vec::with_capacity(self.rows.len());
        let mut ys = Vec::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            xs.push(parse_field(format!("row {} x", i + 1), &r.x)?);
            ys.push(parse_field(format!("row {} y", i + 1), &r.y)?);
        }
        Ok((xs, ys))
    }

    pub fn from_series(x: &[Rational], y: &[Rational]) -> Self {
        TimeSeriesDocument {
            rows: x
                .iter()
                .zip(y)
                .enumerate()
                .map(|(t, (x, y))| TimeRow { t: t.to_string(), x: format_rational(x), y: format_rational(y) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkspaceDocument {
    Lattice(LatticeDocument),
    SMap(SMapDocument),
    Observable(ObservableDocument),
    Experiment(ExperimentDocument),
    TimeSeries(TimeSeriesDocument),
}

impl WorkspaceDocument {
    pub fn kind(&self) -> DocumentKind {
        match self {
            WorkspaceDocument::Lattice(_) => DocumentKind::Lattice,
            WorkspaceDocument::SMap(_) => DocumentKind::SMap,
            WorkspaceDocument::Observable(_) => DocumentKind::Observable,
            WorkspaceDocument::Experiment(_) => DocumentKind::Experiment,
            WorkspaceDocument::TimeSeries(_) => DocumentKind::TimeSeries,
        }
    }

    /// Pretty JSON for JSON kinds, CSV with header for the others.
    pub fn to_text(&self) -> String {
        let json = |v: serde_json::Result<String>| v.expect("documents serialize") + "\n";
        match self {
            WorkspaceDocument::Lattice(d) => json(serde_json::to_string_pretty(d)),
            WorkspaceDocument::SMap(d) => json(serde_json::to_string_pretty(d)),
            WorkspaceDocument::Observable(d) => json(serde_json::to_string_pretty(d)),
            WorkspaceDocument::Experiment(d) => write_csv(&d.rows, &["first", "second", "count"]),
            WorkspaceDocument::TimeSeries(d) => write_csv(&d.rows, &["t", "x", "y"]),
        }
    }

    pub fn to_json_value(&self) -> Value {
        match self {
            WorkspaceDocument::Lattice(d) => serde_json::to_value(d),
            WorkspaceDocument::SMap(d) => serde_json::to_value(d),
            WorkspaceDocument::Observable(d) => serde_json::to_value(d),
            WorkspaceDocument::Experiment(d) => serde_json::to_value(&d.rows),
            WorkspaceDocument::TimeSeries(d) => serde_json::to_value(&d.rows),
        }
        .expect("documents serialize")
    }
}

fn write_csv<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input stays utf-8")
}

fn json_error(source_name: &str, e: serde_json::Error) -> IoError {
    IoError::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    }
}

/// Parses a document, inferring its kind.
pub fn parse_document(text: &str, source_name: &str) -> Result<WorkspaceDocument, IoError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim_start().starts_with('{') {
        parse_json_document(text, source_name)
    } else {
        parse_csv_document(text, source_name)
    }
}

fn parse_json_document(text: &str, source_name: &str) -> Result<WorkspaceDocument, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| json_error(source_name, e))?;
    let obj = value.as_object().ok_or_else(|| IoError::UnknownKind {
        source_name: source_name.into(),
        hint: "top level is not an object".into(),
    })?;
    if let Some(v) = obj.get("schema_version") {
        let version = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
        if version != SCHEMA_VERSION {
            return Err(IoError::SchemaVersionUnsupported { source_name: source_name.into(), version });
        }
    }
    let typed = |e| json_error(source_name, e);
    if let Some(kind) = obj.get("kind") {
        return match kind.as_str() {
            Some("explicit" | "horizontal_sum" | "process") => {
                Ok(WorkspaceDocument::Lattice(serde_json::from_str(text).map_err(typed)?))
            }
            _ => Err(IoError::UnknownKind { source_name: source_name.into(), hint: format!("kind {kind}") }),
        };
    }
    if obj.contains_key("atom_table") || obj.contains_key("full_table") {
        Ok(WorkspaceDocument::SMap(serde_json::from_str(text).map_err(typed)?))
    } else if obj.contains_key("support") {
        Ok(WorkspaceDocument::Observable(serde_json::from_str(text).map_err(typed)?))
    } else {
        Err(IoError::UnknownKind {
            source_name: source_name.into(),
            hint: "no kind, atom_table, full_table or support field".into(),
        })
    }
}

fn parse_csv_document(text: &str, source_name: &str) -> Result<WorkspaceDocument, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(source_name, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    match header.as_slice() {
        ["first", "second", "count"] => Ok(WorkspaceDocument::Experiment(ExperimentDocument {
            rows: read_rows(&mut reader, source_name)?,
        })),
        ["t", "x", "y"] => Ok(WorkspaceDocument::TimeSeries(TimeSeriesDocument {
            rows: read_rows(&mut reader, source_name)?,
        })),
        _ => Err(IoError::UnknownKind {
            source_name: source_name.into(),
            hint: format!("CSV header {:?}", header.join(",")),
        }),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(
    reader: &mut csv::Reader<&[u8]>,
    source_name: &str,
) -> Result<Vec<T>, IoError> {
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| csv_error(source_name, e))
}

fn csv_error(source_name: &str, e: csv::Error) -> IoError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    let (column, message) = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => (
            err.field().map(|f| f as usize + 1).unwrap_or(0),
            err.kind().to_string(),
        ),
        _ => (0, e.to_string()),
    };
    IoError::Parse { source_name: source_name.into(), line, column, message }
}

/// Text of a document together with where it was found.
#[derive(Debug, Clone)]
pub struct Source {
    pub text: String,
    /// `None` for bundled fixtures.
    pub path: Option<PathBuf>,
    pub name: String,
}

/// Resolves `reference` against `base_dir`, the working directory,
/// `$OMLPROB_FIXTURES` and the bundled fixtures, in that order.
pub fn read_source(reference: &str, base_dir: Option<&Path>) -> Result<Source, IoError> {
    let direct = Path::new(reference);
    let mut candidates: Vec<PathBuf> = Vec::new();
    if let Some(dir) = base_dir.filter(|_| direct.is_relative()) {
        candidates.push(dir.join(direct));
    }
    candidates.push(direct.to_path_buf());
    let file_name = direct.file_name().and_then(|n| n.to_str());
    if let (Ok(dir), Some(name)) = (std::env::var(FIXTURES_ENV), file_name) {
        candidates.push(Path::new(&dir).join(name));
    }
    for path in candidates {
        if path.is_file() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| IoError::Read { path: path.display().to_string(), message: e.to_string() })?;
            return Ok(Source { name: path.display().to_string(), text, path: Some(path) });
        }
    }
    if let Some(text) = file_name.and_then(bundled_fixture) {
        return Ok(Source { text: text.to_string(), path: None, name: format!("<bundled>/{}", file_name.unwrap_or_default()) });
    }
    Err(IoError::Read { path: reference.to_string(), message: "no such file or bundled fixture".into() })
}

impl Source {
    pub fn parse(&self) -> Result<WorkspaceDocument, IoError> {
        parse_document(&self.text, &self.name)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.path.as_deref().and_then(Path::parent)
    }

    pub fn expect(&self, kind: DocumentKind) -> Result<WorkspaceDocument, IoError> {
        let doc = self.parse()?;
        if doc.kind() != kind {
            return Err(IoError::WrongKind { source_name: self.name.clone(), expected: kind, found: doc.kind() });
        }
        Ok(doc)
    }
}

pub fn load_lattice(reference: &str, base_dir: Option<&Path>) -> Result<LoadedLattice, IoError> {
    match read_source(reference, base_dir)?.expect(DocumentKind::Lattice)? {
        WorkspaceDocument::Lattice(d) => d.build(),
        _ => unreachable!("kind checked"),
    }
}

/// The lattice of a dependent document: `explicit` wins, then the document's
/// own reference.
pub fn resolve_lattice(
    explicit: Option<&str>,
    own: Option<&LatticeRef>,
    base_dir: Option<&Path>,
) -> Result<LoadedLattice, IoError> {
    match (explicit, own) {
        (Some(path), _) => load_lattice(path, None),
        (None, Some(LatticeRef::Path(path))) => load_lattice(path, base_dir),
        (None, Some(LatticeRef::Inline(doc))) => {
            if doc.schema_version != SCHEMA_VERSION {
                return Err(IoError::SchemaVersionUnsupported {
                    source_name: "inline lattice".into(),
                    version: doc.schema_version.clone(),
                });
            }
            doc.build()
        }
        (None, None) => Err(IoError::MissingLattice),
    }
}

pub fn rational_json(v: &Rational) -> Value {
    Value::String(format_rational(v))
}

/// Outcome of one command: the JSON and text renderings are produced from
/// the same ordered list of facts.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: Vec<String>,
    pub summary: String,
    pub exit_code: i32,
    pub facts: Vec<(String, Value)>,
}

impl Report {
    pub fn new(command: Vec<String>) -> Self {
        Report { command, summary: String::new(), exit_code: 0, facts: Vec::new() }
    }

    pub fn fact(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.facts.push((key.to_string(), value.into()));
        self
    }

    pub fn status(&self) -> &'static str {
        match self.exit_code {
            0 => "ok",
            1 => "failed",
            _ => "error",
        }
    }

    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("command".into(), self.command.clone().into());
        obj.insert("status".into(), self.status().into());
        obj.insert("exit_code".into(), self.exit_code.into());
        obj.insert("summary".into(), self.summary.clone().into());
        for (k, v) in &self.facts {
            obj.insert(k.clone(), v.clone());
        }
        serde_json::to_string_pretty(&Value::Object(obj)).expect("values serialize") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.summary);
        for (k, v) in &self.facts {
            render_text(&mut out, k, v, 0);
        }
        let _ = writeln!(out, "status: {} (exit {})", self.status(), self.exit_code);
        let _ = writeln!(out, "command: {}", self.command.join(" "));
        out
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("none".into()),
        Value::Bool(b) => Some(if *b { "yes" } else { "no" }.into()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => {
            Some(format!("[{}]", items.iter().filter_map(scalar_text).collect::<Vec<_>>().join(", ")))
        }
        _ => None,
    }
}

fn render_text(out: &mut String, key: &str, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    if let Some(s) = scalar_text(v) {
        let _ = writeln!(out, "{pad}{key}: {s}");
        return;
    }
    match v {
        Value::Object(map) => {
            if key == "-" {
                let _ = writeln!(out, "{pad}-");
            } else {
                let _ = writeln!(out, "{pad}{key}:");
            }
            for (k, v) in map {
                render_text(out, k, v, depth + 1);
            }
        }
        Value::Array(items) => {
            let _ = writeln!(out, "{pad}{key}: ({} entries)", items.len());
            for item in items {
                match item {
                    Value::Object(map) if map.values().all(|v| scalar_text(v).is_some()) => {
                        let line: Vec<String> = map
                            .iter()
                            .map(|(k, v)| format!("{k}={}", scalar_text(v).unwrap_or_default()))
                            .collect();
                        let _ = writeln!(out, "{pad}  - {}", line.join(", "));
                    }
                    other => render_text(out, "-", other, depth + 1),
                }
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_parse() {
        for name in bundled_fixture_names() {
            let doc = parse_document(bundled_fixture(name).unwrap(), name).unwrap();
            let again = parse_document(&doc.to_text(), name).unwrap();
            assert_eq!(doc, again, "{name} does not round-trip");
        }
    }

    #[test]
    fn kinds_are_inferred() {
        let kind = |name: &str| parse_document(bundled_fixture(name).unwrap(), name).unwrap().kind();
        assert_eq!(kind("l1.json"), DocumentKind::Lattice);
        assert_eq!(kind("p1_process.json"), DocumentKind::Lattice);
        assert_eq!(kind("p1_smap.json"), DocumentKind::SMap);
        assert_eq!(kind("obs_a.json"), DocumentKind::Observable);
        assert_eq!(kind("exp_xi_first.csv"), DocumentKind::Experiment);
        assert_eq!(kind("ts_noise.csv"), DocumentKind::TimeSeries);
    }

    #[test]
    fn truncated_json_reports_position() {
        let text = bundled_fixture("l1.json").unwrap();
        let cut = &text[..text.len() / 2];
        match parse_document(cut, "cut.json") {
            Err(IoError::Parse { line, column, .. }) => assert!(line > 1 && column > 0),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_kinds_and_versions() {
        assert!(matches!(
            parse_document(r#"{"kind":"pasting"}"#, "x"),
            Err(IoError::UnknownKind { .. })
        ));
        assert!(matches!(
            parse_document(r#"{"schema_version":"2","kind":"explicit"}"#, "x"),
            Err(IoError::SchemaVersionUnsupported { .. })
        ));
        assert!(matches!(parse_document("a,b\n1,2\n", "x"), Err(IoError::UnknownKind { .. })));
        match parse_document("first,second,count\na,b,x\n", "x") {
            Err(IoError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn smap_document_round_trips_through_smap() {
        let l = match load_lattice("l1.json", None).unwrap() {
            LoadedLattice::Plain(l) => l,
            LoadedLattice::Process(_) => unreachable!(),
        };
        let doc = match parse_document(bundled_fixture("p1_smap.json").unwrap(), "p1").unwrap() {
            WorkspaceDocument::SMap(d) => d,
            _ => unreachable!(),
        };
        let p = doc.build(&l).unwrap();
        let back = SMapDocument::from_smap(&p, None).build(&l).unwrap();
        assert_eq!(p.table(), back.table());
        assert_eq!(LatticeDocument::from_oml(&l).build().unwrap().oml(), &l);
        let l2 = load_lattice("l2.json", None).unwrap();
        assert_eq!(LatticeDocument::from_oml(l2.oml()).build().unwrap().oml(), l2.oml());
    }

    #[test]
    fn series_fixtures_match_their_seeds() {
        use crate::generate::{integer_series, noise_series};
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let series = |name: &str| match parse_document(bundled_fixture(name).unwrap(), name).unwrap() {
            WorkspaceDocument::TimeSeries(d) => d.series().unwrap(),
            _ => unreachable!(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let x = integer_series(&mut rng, 50, 9);
        let (fx, fy) = series("ts_lagged.csv");
        assert_eq!(fx, x);
        assert_eq!(fy[1..], x[..49]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = noise_series(&mut rng, 50, 8);
        let y = noise_series(&mut rng, 50, 8);
        assert_eq!(series("ts_noise.csv"), (x, y));
    }

    #[test]
    fn report_renderings_share_facts() {
        let mut r = Report::new(vec!["validate".into(), "l1.json".into()]);
        r.summary = "valid OML".into();
        r.fact("blocks", 2).fact("witness", serde_json::json!([{"a": "x", "b": "1/2"}]));
        let text = r.to_text();
        let json: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["blocks"], 2);
        assert!(text.contains("blocks: 2") && text.contains("a=x, b=1/2"));
    }
}
