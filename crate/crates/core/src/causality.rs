//! Non-symmetric causality between observables living in different blocks of
//! a horizontal sum.
//!
//! A [`ProcessLattice`] glues one copy of a Boolean event algebra per
//! (series, time stamp) cell. [`granger_causes`] evaluates the exact predicate
//! "conditioning the effect cell on the cause cell changes some probability",
//! [`fit_smap_from_experiments`] builds an s-map from two order-dependent
//! experiments, and [`classical_granger_lag1`] is a small lag-1 variance
//! comparison kept as a classical reference point.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::lattice::{ElementId, FiniteOml, LatticeError};
use crate::observable::{Observable, ObservableError};
use crate::rational::{format_rational, Rational};
use crate::state::{SMap, SMapError, State, StateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CausalityError {
    #[error("base event algebra is not Boolean ({0} blocks)")]
    BaseNotBoolean(usize),
    #[error("a process lattice needs at least 2 cells, got {0}")]
    TooFewBlocks(usize),
    #[error("cell {0} appears twice")]
    DuplicateCell(String),
    #[error("unknown series/stamp {0}")]
    UnknownSeriesOrStamp(String),
    #[error("malformed cell reference {0:?}, expected <series>@<stamp>")]
    BadCellReference(String),
    #[error("cell {cell} labels {got} atoms but the base has {expected}")]
    LabelCount {
        cell: String,
        expected: usize,
        got: usize,
    },
    #[error("s-map is defined on a different lattice")]
    LatticeMismatch,
    #[error("cause and effect are the same cell {0}")]
    SameCell(String),
    #[error("experiment fitting needs exactly 2 cells, got {0}")]
    NotTwoCells(usize),
    #[error("experiment has no observations")]
    EmptyExperiment,
    #[error("experiment order is {got}, expected {expected}")]
    OrderMismatch {
        expected: ExperimentOrder,
        got: ExperimentOrder,
    },
    #[error("outcome labels do not match the cell atoms: {0}")]
    LabelMismatch(String),
    #[error("marginal of {atom} differs between experiments beyond tolerance: {first} vs {second}")]
    MarginalMismatch {
        atom: String,
        first: String,
        second: String,
    },
    #[error("reconciled frequency for ({a}, {b}) is negative: {value}")]
    NegativeAfterReconciliation { a: String, b: String, value: String },
    #[error("time series must have equal lengths of at least 3 (got {x} and {y})")]
    InvalidSeries { x: usize, y: usize },
    #[error("degenerate design in the {0} regression: singular normal equations")]
    DegenerateDesign(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    SMap(#[from] SMapError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// One (series, time stamp) copy of the base algebra.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub series: String,
    pub stamp: String,
}

impl Cell {
    pub fn new(series: impl Into<String>, stamp: impl Into<String>) -> Self {
        Cell { series: series.into(), stamp: stamp.into() }
    }

    /// Parses `<series>@<stamp>`.
    pub fn parse(text: &str) -> Result<Self, CausalityError> {
        match text.split_once('@') {
            Some((s, t)) if !s.is_empty() && !t.is_empty() && !t.contains('@') => Ok(Cell::new(s, t)),
            _ => Err(CausalityError::BadCellReference(text.to_string())),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.series, self.stamp)
    }
}

/// Horizontal sum of copies of a Boolean event algebra, one per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessLattice {
    base: FiniteOml,
    cells: Vec<Cell>,
    lattice: FiniteOml,
    /// `embedding[cell][base element]` is the element of `lattice`.
    embedding: Vec<Vec<ElementId>>,
}

impl ProcessLattice {
    /// One cell per (series, stamp), series-major.
    pub fn build<S: AsRef<str>, T: AsRef<str>>(
        base: FiniteOml,
        stamps: &[T],
        series: &[S],
    ) -> Result<Self, CausalityError> {
        let cells = series
            .iter()
            .flat_map(|s| stamps.iter().map(move |t| Cell::new(s.as_ref(), t.as_ref())))
            .map(|c| (c, None))
            .collect();
        Self::from_cells(base, cells)
    }

    /// Cells in the given order. A cell may carry its own names for the base
    /// atoms (in base atom order); otherwise elements are named
    /// `<series>@<stamp>:<base name>`.
    pub fn from_cells(
        base: FiniteOml,
        cells: Vec<(Cell, Option<Vec<String>>)>,
    ) -> Result<Self, CausalityError> {
        if !base.is_boolean() {
            return Err(CausalityError::BaseNotBoolean(base.blocks().len()));
        }
        if cells.len() < 2 {
            return Err(CausalityError::TooFewBlocks(cells.len()));
        }
        for (i, (c, _)) in cells.iter().enumerate() {
            if cells[..i].iter().any(|(d, _)| d == c) {
                return Err(CausalityError::DuplicateCell(c.to_string()));
            }
        }
        let mut copies = Vec::with_capacity(cells.len());
        for (cell, labels) in &cells {
            let copy = match labels {
                None => base.renamed(|_, name| format!("{cell}:{name}"))?,
                Some(labels) => {
                    if labels.len() != base.atoms().len() {
                        return Err(CausalityError::LabelCount {
                            cell: cell.to_string(),
                            expected: base.atoms().len(),
                            got: labels.len(),
                        });
                    }
                    let label_of: BTreeMap<ElementId, &str> = base
                        .atoms()
                        .iter()
                        .copied()
                        .zip(labels.iter().map(String::as_str))
                        .collect();
                    base.renamed(|e, _| labelled_name(&base, &label_of, e))?
                }
            };
            copies.push(copy);
        }
        let (lattice, embedding) = FiniteOml::horizontal_sum_embedded(&copies)?;
        Ok(ProcessLattice {
            base,
            cells: cells.into_iter().map(|(c, _)| c).collect(),
            lattice,
            embedding,
        })
    }

    pub fn base(&self) -> &FiniteOml {
        &self.base
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn lattice(&self) -> &FiniteOml {
        &self.lattice
    }

    pub fn cell_index(&self, cell: &Cell) -> Result<usize, CausalityError> {
        self.cells
            .iter()
            .position(|c| c == cell)
            .ok_or_else(|| CausalityError::UnknownSeriesOrStamp(cell.to_string()))
    }

    /// Image of a base element in the given cell.
    pub fn index(&self, cell: &Cell, base_element: ElementId) -> Result<ElementId, CausalityError> {
        Ok(self.embedding[self.cell_index(cell)?][base_element.0])
    }

    /// Every element of the cell's copy, in base order.
    pub fn cell_elements(&self, cell: usize) -> &[ElementId] {
        &self.embedding[cell]
    }

    /// Atoms of the cell's copy, in base atom order.
    pub fn cell_atoms(&self, cell: usize) -> Vec<ElementId> {
        self.base.atoms().iter().map(|a| self.embedding[cell][a.0]).collect()
    }

    /// Copies a base observable into the block of `cell`.
    pub fn lift_observable(
        &self,
        cell: &Cell,
        x: &Observable<'_>,
    ) -> Result<Observable<'_>, CausalityError> {
        let ci = self.cell_index(cell)?;
        let support = x
            .support()
            .iter()
            .map(|(v, e)| (v.clone(), self.embedding[ci][e.0]))
            .collect();
        Ok(Observable::validate(&self.lattice, support)?)
    }
}

fn labelled_name(base: &FiniteOml, label_of: &BTreeMap<ElementId, &str>, e: ElementId) -> String {
    if let Some(l) = label_of.get(&e) {
        return l.to_string();
    }
    if let Some(l) = label_of.get(&base.ortho(e)) {
        return format!("{l}'");
    }
    base.atoms()
        .iter()
        .filter(|&&a| base.leq(a, e))
        .map(|a| label_of[a])
        .collect::<Vec<_>>()
        .join("+")
}

/// `f_p(A|B)` against `μ_p(A)` for an effect event `A` and a conditioning
/// event `B` where the two differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrangerWitness {
    pub effect_event: ElementId,
    pub conditioning_event: ElementId,
    pub conditional: Rational,
    pub unconditional: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrangerVerdict {
    pub causes: bool,
    pub cause: Cell,
    pub effect: Cell,
    pub witnesses: Vec<GrangerWitness>,
    /// Conditioning events skipped because they carry zero mass.
    pub zero_mass_conditioners: Vec<ElementId>,
}

/// Does the cause cell change the distribution of the effect cell?
///
/// Scans every event `A` of the effect block and every non-bottom event `B`
/// of the cause block with `μ_p(B) > 0`, comparing `f_p(A|B) = p(A, B) / μ_p(B)`
/// with `μ_p(A)` exactly.
pub fn granger_causes(
    pl: &ProcessLattice,
    p: &SMap<'_>,
    effect: &Cell,
    cause: &Cell,
) -> Result<GrangerVerdict, CausalityError> {
    if p.lattice() != pl.lattice() {
        return Err(CausalityError::LatticeMismatch);
    }
    let ei = pl.cell_index(effect)?;
    let ci = pl.cell_index(cause)?;
    if ei == ci {
        return Err(CausalityError::SameCell(effect.to_string()));
    }
    let l = pl.lattice();
    let mut witnesses = Vec::new();
    let mut zero_mass_conditioners = Vec::new();
    for &b in pl.cell_elements(ci) {
        if b != l.bottom() && p.mass(b).is_zero() {
            zero_mass_conditioners.push(b);
        }
    }
    for &a in pl.cell_elements(ei) {
        for &b in pl.cell_elements(ci) {
            if b == l.bottom() || p.mass(b).is_zero() {
                continue;
            }
            let conditional = p.get(a, b) / p.mass(b);
            if conditional != *p.mass(a) {
                witnesses.push(GrangerWitness {
                    effect_event: a,
                    conditioning_event: b,
                    conditional,
                    unconditional: p.mass(a).clone(),
                });
            }
        }
    }
    Ok(GrangerVerdict {
        causes: !witnesses.is_empty(),
        cause: cause.clone(),
        effect: effect.clone(),
        witnesses,
        zero_mass_conditioners,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentOrder {
    /// ξ measured first, then η.
    XiThenEta,
    /// η measured first, then ξ.
    EtaThenXi,
}

impl fmt::Display for ExperimentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentOrder::XiThenEta => "xi-then-eta",
            ExperimentOrder::EtaThenXi => "eta-then-xi",
        })
    }
}

/// Outcome counts of a two-measurement experiment, keyed by
/// (first outcome, second outcome).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentCounts {
    pub order: ExperimentOrder,
    pub counts: BTreeMap<(String, String), u64>,
}

impl ExperimentCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    fn frequency(&self, first: &str, second: &str) -> Rational {
        let c = self
            .counts
            .get(&(first.to_string(), second.to_string()))
            .copied()
            .unwrap_or(0);
        Rational::new(c.into(), self.total().into())
    }
}

/// S-map fitted from two experiments, with the raw marginal disagreement.
#[derive(Debug, Clone)]
pub struct FittedSMap<'a> {
    pub smap: SMap<'a>,
    pub xi_cell: usize,
    pub eta_cell: usize,
    /// `(atom, marginal where measured first, marginal where measured second)`.
    pub marginals: Vec<(ElementId, Rational, Rational)>,
}

impl FittedSMap<'_> {
    pub fn reconciled(&self) -> bool {
        self.marginals.iter().any(|(_, a, b)| a != b)
    }
}

/// Builds an s-map on a two-cell process lattice from a ξ-then-η experiment
/// and an η-then-ξ experiment.
///
/// Cross entries come from the relative frequencies of the experiment in which
/// the row variable was measured first. Each variable's marginal is taken from
/// the experiment that measured it first; when the other experiment disagrees
/// by at most `tolerance`, its table is shifted by `μ(row) · (target − observed)`
/// per column, which restores both margins exactly and leaves the
/// order-dependent cross structure otherwise untouched.
pub fn fit_smap_from_experiments<'a>(
    pl: &'a ProcessLattice,
    xi_first: &ExperimentCounts,
    eta_first: &ExperimentCounts,
    tolerance: &Rational,
) -> Result<FittedSMap<'a>, CausalityError> {
    if pl.cells().len() != 2 {
        return Err(CausalityError::NotTwoCells(pl.cells().len()));
    }
    for (exp, expected) in [
        (xi_first, ExperimentOrder::XiThenEta),
        (eta_first, ExperimentOrder::EtaThenXi),
    ] {
        if exp.order != expected {
            return Err(CausalityError::OrderMismatch { expected, got: exp.order });
        }
        if exp.total() == 0 {
            return Err(CausalityError::EmptyExperiment);
        }
    }
    let l = pl.lattice();
    let atom_names = |cell: usize| -> Vec<String> {
        pl.cell_atoms(cell).iter().map(|&a| l.name(a).to_string()).collect()
    };
    let first_labels = |exp: &ExperimentCounts| -> Vec<String> {
        let mut v: Vec<String> = exp.counts.keys().map(|(f, _)| f.clone()).collect();
        v.dedup();
        v
    };
    let xi_cell = {
        let labels = first_labels(xi_first);
        let probe = labels.first().ok_or(CausalityError::EmptyExperiment)?;
        (0..2)
            .find(|&c| atom_names(c).contains(probe))
            .ok_or_else(|| CausalityError::LabelMismatch(format!("{probe} is not an atom of either cell")))?
    };
    let eta_cell = 1 - xi_cell;
    let xi_atoms = atom_names(xi_cell);
    let eta_atoms = atom_names(eta_cell);
    check_labels(xi_first, &xi_atoms, &eta_atoms, "xi-then-eta")?;
    check_labels(eta_first, &eta_atoms, &xi_atoms, "eta-then-xi")?;

    // freq1[α][β] from ξ-then-η, freq2[β][α] from η-then-ξ.
    let freq1: Vec<Vec<Rational>> = xi_atoms
        .iter()
        .map(|a| eta_atoms.iter().map(|b| xi_first.frequency(a, b)).collect())
        .collect();
    let freq2: Vec<Vec<Rational>> = eta_atoms
        .iter()
        .map(|b| xi_atoms.iter().map(|a| eta_first.frequency(b, a)).collect())
        .collect();
    let row_sums = |t: &Vec<Vec<Rational>>| -> Vec<Rational> { t.iter().map(|r| r.iter().sum()).collect() };
    let col_sums = |t: &Vec<Vec<Rational>>, cols: usize| -> Vec<Rational> {
        (0..cols).map(|j| t.iter().map(|r| &r[j]).sum()).collect()
    };
    let xi_marginal = row_sums(&freq1);
    let xi_second = col_sums(&freq2, xi_atoms.len());
    let eta_marginal = row_sums(&freq2);
    let eta_second = col_sums(&freq1, eta_atoms.len());

    let mut marginals = Vec::new();
    for (names, first, second, cell) in [
        (&xi_atoms, &xi_marginal, &xi_second, xi_cell),
        (&eta_atoms, &eta_marginal, &eta_second, eta_cell),
    ] {
        for (i, name) in names.iter().enumerate() {
            if (&first[i] - &second[i]).abs() > *tolerance {
                return Err(CausalityError::MarginalMismatch {
                    atom: name.clone(),
                    first: format_rational(&first[i]),
                    second: format_rational(&second[i]),
                });
            }
            marginals.push((pl.cell_atoms(cell)[i], first[i].clone(), second[i].clone()));
        }
    }

    let reconcile = |table: &Vec<Vec<Rational>>,
                     row_marginal: &[Rational],
                     target: &[Rational],
                     observed: &[Rational],
                     rows: &[String],
                     cols: &[String]|
     -> Result<Vec<Vec<Rational>>, CausalityError> {
        let mut out = table.clone();
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += &row_marginal[i] * (&target[j] - &observed[j]);
                if v.is_negative() {
                    return Err(CausalityError::NegativeAfterReconciliation {
                        a: rows[i].clone(),
                        b: cols[j].clone(),
                        value: format_rational(v),
                    });
                }
            }
        }
        Ok(out)
    };
    let xi_rows = reconcile(&freq1, &xi_marginal, &eta_marginal, &eta_second, &xi_atoms, &eta_atoms)?;
    let eta_rows = reconcile(&freq2, &eta_marginal, &xi_marginal, &xi_second, &eta_atoms, &xi_atoms)?;

    let xi_ids = pl.cell_atoms(xi_cell);
    let eta_ids = pl.cell_atoms(eta_cell);
    let mut atom_values = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for (i, &a) in xi_ids.iter().enumerate() {
        weights.insert(a, xi_marginal[i].clone());
        for (j, &b) in eta_ids.iter().enumerate() {
            atom_values.insert((a, b), xi_rows[i][j].clone());
            atom_values.insert((b, a), eta_rows[j][i].clone());
        }
    }
    for (j, &b) in eta_ids.iter().enumerate() {
        weights.insert(b, eta_marginal[j].clone());
    }
    let marginal = State::from_atom_weights(l, &weights)?;
    let smap = SMap::from_atom_table(l, &atom_values, &marginal)?;
    Ok(FittedSMap { smap, xi_cell, eta_cell, marginals })
}

fn check_labels(
    exp: &ExperimentCounts,
    first: &[String],
    second: &[String],
    which: &str,
) -> Result<(), CausalityError> {
    for (f, s) in exp.counts.keys() {
        if !first.contains(f) {
            return Err(CausalityError::LabelMismatch(format!(
                "{which}: first outcome {f} is not one of {}",
                first.join(", ")
            )));
        }
        if !second.contains(s) {
            return Err(CausalityError::LabelMismatch(format!(
                "{which}: second outcome {s} is not one of {}",
                second.join(", ")
            )));
        }
    }
    Ok(())
}

/// Lag-1 bivariate variance comparison: does adding `x[t-1]` to the
/// regression of `y[t]` on `(1, y[t-1])` lower the residual variance?
///
/// A reference approximation only: the universe is just `{x, y}`, there is a
/// single lag, and no significance test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalGrangerReport {
    pub observations: usize,
    /// Intercept and slope on `y[t-1]`.
    pub restricted_coefficients: Vec<Rational>,
    /// Intercept and slopes on `y[t-1]`, `x[t-1]`.
    pub full_coefficients: Vec<Rational>,
    pub restricted_rss: Rational,
    pub full_rss: Rational,
    /// `RSS / (observations - parameters)`.
    pub restricted_variance: Rational,
    pub full_variance: Rational,
    pub verdict: bool,
}

pub const CLASSICAL_LABEL: &str =
    "reference approximation of classical Granger causality (lag 1, universe {x, y}, no significance test)";

pub fn classical_granger_lag1(
    x: &[Rational],
    y: &[Rational],
) -> Result<ClassicalGrangerReport, CausalityError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(CausalityError::InvalidSeries { x: x.len(), y: y.len() });
    }
    let one = Rational::from_integer(1.into());
    let target: Vec<Rational> = y[1..].to_vec();
    let restricted: Vec<Vec<Rational>> = (1..y.len()).map(|t| vec![one.clone(), y[t - 1].clone()]).collect();
    let full: Vec<Vec<Rational>> = (1..y.len())
        .map(|t| vec![one.clone(), y[t - 1].clone(), x[t - 1].clone()])
        .collect();
    let (rc, rr) = least_squares(&restricted, &target).ok_or(CausalityError::DegenerateDesign("restricted"))?;
    let (fc, fr) = least_squares(&full, &target).ok_or(CausalityError::DegenerateDesign("full"))?;
    let n = target.len();
    if n <= 3 {
        return Err(CausalityError::DegenerateDesign("full"));
    }
    let rv = &rr / Rational::from_integer((n - 2).into());
    let fv = &fr / Rational::from_integer((n - 3).into());
    Ok(ClassicalGrangerReport {
        observations: n,
        restricted_coefficients: rc,
        full_coefficients: fc,
        verdict: fv < rv,
        restricted_rss: rr,
        full_rss: fr,
        restricted_variance: rv,
        full_variance: fv,
    })
}

/// Exact OLS through the normal equations; `None` when they are singular.
fn least_squares(design: &[Vec<Rational>], target: &[Rational]) -> Option<(Vec<Rational>, Rational)> {
    let k = design[0].len();
    let mut m: Vec<Vec<Rational>> = (0..k)
        .map(|i| {
            let mut row: Vec<Rational> = (0..k)
                .map(|j| design.iter().map(|r| &r[i] * &r[j]).sum())
                .collect();
            row.push(design.iter().zip(target).map(|(r, t)| &r[i] * t).sum());
            row
        })
        .collect();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v /= &p;
        }
        for r in 0..k {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..=k {
                    let delta = &factor * &m[col][c];
                    m[r][c] -= delta;
                }
            }
        }
    }
    let beta: Vec<Rational> = m.iter().map(|row| row[k].clone()).collect();
    let rss = design
        .iter()
        .zip(target)
        .map(|(r, t)| {
            let fitted: Rational = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let e = t - fitted;
            &e * &e
        })
        .sum();
    Some((beta, rss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{integer, rational};

    fn two_atom_base() -> FiniteOml {
        FiniteOml::boolean_algebra(&["hi", "lo"]).unwrap()
    }

    #[test]
    fn build_sizes_and_errors() {
        let pl = ProcessLattice::build(two_atom_base(), &["t"], &["X", "Y"]).unwrap();
        assert_eq!(pl.lattice().len(), 6);
        assert!(pl.lattice().is_horizontal_sum());
        assert_eq!(pl.lattice().name(ElementId(1)), "X@t:hi");
        let pl = ProcessLattice::build(two_atom_base(), &["1", "2", "3"], &["X"]).unwrap();
        assert_eq!(pl.lattice().len(), 8);
        let l1 = FiniteOml::horizontal_sum(&[two_atom_base(), FiniteOml::boolean_algebra(&["u", "v"]).unwrap()])
            .unwrap();
        assert_eq!(
            ProcessLattice::build(l1, &["t"], &["X", "Y"]),
            Err(CausalityError::BaseNotBoolean(2))
        );
        assert_eq!(
            ProcessLattice::build(two_atom_base(), &["t"], &["X"]),
            Err(CausalityError::TooFewBlocks(1))
        );
    }

    #[test]
    fn three_atom_labels() {
        let base = FiniteOml::boolean_algebra(&["u", "v", "w"]).unwrap();
        let cells = vec![
            (Cell::new("X", "1"), Some(vec!["a".into(), "b".into(), "c".into()])),
            (Cell::new("Y", "0"), None),
        ];
        let pl = ProcessLattice::from_cells(base, cells).unwrap();
        assert!(pl.lattice().element("c'").is_some());
        assert!(pl.lattice().element("Y@0:u").is_some());
    }

    #[test]
    fn lifted_observables() {
        let base = two_atom_base();
        let pl = ProcessLattice::build(base.clone(), &["t"], &["X", "Y"]).unwrap();
        let hi = base.element("hi").unwrap();
        let x = Observable::indicator(&base, hi).unwrap();
        let xt = pl.lift_observable(&Cell::new("X", "t"), &x).unwrap();
        let yt = pl.lift_observable(&Cell::new("Y", "t"), &x).unwrap();
        assert_eq!(xt.support()[1].1, pl.index(&Cell::new("X", "t"), hi).unwrap());
        assert!(!xt.is_compatible_with(&yt));
        let lo = Observable::indicator(&base, base.element("lo").unwrap()).unwrap();
        let xt2 = pl.lift_observable(&Cell::new("X", "t"), &lo).unwrap();
        assert!(xt.is_compatible_with(&xt2));
        assert!(matches!(
            pl.lift_observable(&Cell::new("Z", "t"), &x),
            Err(CausalityError::UnknownSeriesOrStamp(_))
        ));
    }

    fn p1_process() -> ProcessLattice {
        let cells = vec![
            (Cell::new("X", "t1"), Some(vec!["a".into(), "a'".into()])),
            (Cell::new("Y", "t"), Some(vec!["b".into(), "b'".into()])),
        ];
        ProcessLattice::from_cells(two_atom_base(), cells).unwrap()
    }

    fn counts(order: ExperimentOrder, rows: &[(&str, &str, u64)]) -> ExperimentCounts {
        ExperimentCounts {
            order,
            counts: rows.iter().map(|&(f, s, c)| ((f.into(), s.into()), c)).collect(),
        }
    }

    fn p1_experiments() -> (ExperimentCounts, ExperimentCounts) {
        (
            counts(
                ExperimentOrder::XiThenEta,
                &[("a", "b", 20), ("a", "b'", 10), ("a'", "b", 30), ("a'", "b'", 40)],
            ),
            counts(
                ExperimentOrder::EtaThenXi,
                &[("b", "a", 15), ("b", "a'", 35), ("b'", "a", 15), ("b'", "a'", 35)],
            ),
        )
    }

    #[test]
    fn fitter_and_granger_on_p1() {
        let pl = p1_process();
        let l = pl.lattice();
        let (e1, e2) = p1_experiments();
        let fitted = fit_smap_from_experiments(&pl, &e1, &e2, &rational(1, 100)).unwrap();
        assert!(!fitted.reconciled());
        let p = &fitted.smap;
        let id = |n: &str| l.element(n).unwrap();
        assert_eq!(*p.get(id("a"), id("b")), rational(1, 5));
        assert_eq!(*p.get(id("b"), id("a")), rational(3, 20));
        assert_eq!(*p.get(id("a'"), id("b'")), rational(2, 5));

        let x = Cell::new("X", "t1");
        let y = Cell::new("Y", "t");
        let v = granger_causes(&pl, p, &x, &y).unwrap();
        assert!(v.causes);
        let w = v
            .witnesses
            .iter()
            .find(|w| w.effect_event == id("a") && w.conditioning_event == id("b"))
            .unwrap();
        assert_eq!((w.conditional.clone(), w.unconditional.clone()), (rational(2, 5), rational(3, 10)));
        let back = granger_causes(&pl, p, &y, &x).unwrap();
        assert!(!back.causes && back.witnesses.is_empty());
        assert_eq!(granger_causes(&pl, p, &x, &x), Err(CausalityError::SameCell("X@t1".into())));
    }

    #[test]
    fn fitter_reconciles_within_tolerance_only() {
        let pl = p1_process();
        let (_, e2) = p1_experiments();
        // ξ-first marginal of a is 32/100 against 30/100 in the other order.
        let e1 = counts(
            ExperimentOrder::XiThenEta,
            &[("a", "b", 21), ("a", "b'", 11), ("a'", "b", 29), ("a'", "b'", 39)],
        );
        let err = fit_smap_from_experiments(&pl, &e1, &e2, &rational(1, 100)).unwrap_err();
        assert_eq!(
            err,
            CausalityError::MarginalMismatch { atom: "a".into(), first: "8/25".into(), second: "3/10".into() }
        );
        let fitted = fit_smap_from_experiments(&pl, &e1, &e2, &rational(1, 20)).unwrap();
        assert!(fitted.reconciled());
        let mu = fitted.smap.mu();
        let l = pl.lattice();
        assert_eq!(*mu.value(l.element("a").unwrap()), rational(8, 25));
        assert_eq!(*mu.value(l.element("b").unwrap()), rational(1, 2));

        let empty = counts(ExperimentOrder::EtaThenXi, &[]);
        assert_eq!(
            fit_smap_from_experiments(&pl, &e1, &empty, &rational(1, 20)).unwrap_err(),
            CausalityError::EmptyExperiment
        );
        let bad = counts(ExperimentOrder::EtaThenXi, &[("b", "z", 3)]);
        assert!(matches!(
            fit_smap_from_experiments(&pl, &e1, &bad, &rational(1, 20)),
            Err(CausalityError::LabelMismatch(_))
        ));
    }

    #[test]
    fn cell_parsing() {
        assert_eq!(Cell::parse("X@t1").unwrap(), Cell::new("X", "t1"));
        for bad in ["X", "@t", "X@", "X@t@u"] {
            assert!(Cell::parse(bad).is_err());
        }
    }

    #[test]
    fn deterministic_coupling_and_degenerate_design() {
        let x: Vec<Rational> = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3].iter().map(|&v| integer(v)).collect();
        let mut y = vec![integer(0)];
        y.extend(x[..x.len() - 1].iter().cloned());
        let r = classical_granger_lag1(&x, &y).unwrap();
        assert!(r.full_rss.is_zero());
        assert!(r.restricted_rss > Rational::zero());
        assert!(r.verdict);
        assert_eq!(r.full_coefficients, vec![integer(0), integer(0), integer(1)]);

        let flat = vec![rational(1, 2); 10];
        assert_eq!(
            classical_granger_lag1(&flat, &y),
            Err(CausalityError::DegenerateDesign("full"))
        );
        assert!(matches!(
            classical_granger_lag1(&x[..2], &y[..2]),
            Err(CausalityError::InvalidSeries { .. })
        ));
    }
}
