//! States, s-maps and conditional states on a finite orthomodular lattice.
//!
//! All values are exact rationals and every axiom is checked by exhaustive
//! enumeration. Additivity over orthogonal families is checked on orthogonal
//! pairs: in a finite lattice any orthogonal family is built by joining one
//! element at a time, and each partial join stays orthogonal to the rest.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::lattice::{ElementId, FiniteOml};
use crate::rational::{format_rational, is_probability, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("expected {expected} values, got {got}")]
    WrongSize { expected: usize, got: usize },
    #[error("value {value} at {element} is outside [0, 1]")]
    OutOfRange { element: String, value: String },
    #[error("state is not normalized: m(1) = {0}")]
    NotNormalized(String),
    #[error("additivity fails on orthogonal {a}, {b}: m({a} v {b}) = {lhs} but m({a}) + m({b}) = {rhs}")]
    AdditivityViolated {
        a: String,
        b: String,
        lhs: String,
        rhs: String,
    },
    #[error("no weight given for atom {0}")]
    MissingAtom(String),
    #[error("atom weights disagree on {element}: {first} vs {second}")]
    InconsistentAtomWeights {
        element: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SMapError {
    #[error("expected a {expected}x{expected} table")]
    WrongSize { expected: usize },
    #[error("p({a}, {b}) = {value} is outside [0, 1]")]
    OutOfRange { a: String, b: String, value: String },
    #[error("s1 fails: p(1, 1) = {0}")]
    S1Violated(String),
    #[error("s2 fails: {a} and {b} are orthogonal but p({a}, {b}) = {value}")]
    S2Violated { a: String, b: String, value: String },
    #[error("s3 fails in the {side} argument: {a1} v {a2} against {other} gives {lhs}, parts sum to {rhs}")]
    S3Violated {
        side: &'static str,
        a1: String,
        a2: String,
        other: String,
        lhs: String,
        rhs: String,
    },
    #[error("p2 fails: p({a}, {b}) = {value} exceeds p({a}, {a}) = {diagonal}")]
    P2Violated {
        a: String,
        b: String,
        value: String,
        diagonal: String,
    },
    #[error("decompositions of p({row}, {column}) disagree: {first} vs {second}")]
    DecompositionMismatch {
        row: String,
        column: String,
        first: String,
        second: String,
    },
    #[error("atom table has no value for p({0}, {1})")]
    MissingAtomPair(String, String),
    #[error("marginal of {element} is {marginal} but the table gives {table}")]
    MarginalInconsistent {
        element: String,
        marginal: String,
        table: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionalError {
    #[error("expected one row per element ({expected}), got {got}")]
    WrongSize { expected: usize, got: usize },
    #[error("no row for conditioner {0}")]
    MissingConditioner(String),
    #[error("c1 fails: f(.|{conditioner}) is not a state: {source}")]
    C1Violated {
        conditioner: String,
        source: StateError,
    },
    #[error("c2 fails: f({conditioner}|{conditioner}) = {value}")]
    C2Violated { conditioner: String, value: String },
    #[error("c3 fails for {a1} v {a2} at {b}: f(b|join) = {lhs}, mixture = {rhs}")]
    C3Violated {
        a1: String,
        a2: String,
        b: String,
        lhs: String,
        rhs: String,
    },
    #[error("{0} has zero mass and no state concentrated on it was found")]
    NoFallbackState(String),
    #[error("supplied fallback for {conditioner} gives it mass {value}, not 1")]
    FallbackNotConcentrated { conditioner: String, value: String },
}

/// An additive, normalized map from lattice elements to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State<'a> {
    lattice: &'a FiniteOml,
    values: Vec<Rational>,
}

impl<'a> State<'a> {
    pub fn validate(lattice: &'a FiniteOml, values: Vec<Rational>) -> Result<Self, StateError> {
        if values.len() != lattice.len() {
            return Err(StateError::WrongSize {
                expected: lattice.len(),
                got: values.len(),
            });
        }
        let name = |e: ElementId| lattice.name(e).to_string();
        for e in lattice.elements() {
            if !is_probability(&values[e.0]) {
                return Err(StateError::OutOfRange {
                    element: name(e),
                    value: format_rational(&values[e.0]),
                });
            }
        }
        let top = &values[lattice.top().0];
        if !top.is_one() {
            return Err(StateError::NotNormalized(format_rational(top)));
        }
        for (a, b) in orthogonal_pairs(lattice) {
            let lhs = &values[lattice.join(a, b).0];
            let rhs = &values[a.0] + &values[b.0];
            if *lhs != rhs {
                return Err(StateError::AdditivityViolated {
                    a: name(a),
                    b: name(b),
                    lhs: format_rational(lhs),
                    rhs: format_rational(&rhs),
                });
            }
        }
        Ok(State { lattice, values })
    }

    /// Extends weights given on atoms to every element through its atom
    /// decompositions, then validates the result.
    pub fn from_atom_weights(
        lattice: &'a FiniteOml,
        weights: &BTreeMap<ElementId, Rational>,
    ) -> Result<Self, StateError> {
        let mut values = Vec::with_capacity(lattice.len());
        for e in lattice.elements() {
            let mut value: Option<Rational> = None;
            for d in lattice.atom_decompositions(e) {
                let mut sum = Rational::zero();
                for atom in &d.atoms {
                    let w = weights
                        .get(atom)
                        .ok_or_else(|| StateError::MissingAtom(lattice.name(*atom).into()))?;
                    sum += w;
                }
                match &value {
                    None => value = Some(sum),
                    Some(v) if *v != sum => {
                        return Err(StateError::InconsistentAtomWeights {
                            element: lattice.name(e).into(),
                            first: format_rational(v),
                            second: format_rational(&sum),
                        })
                    }
                    Some(_) => {}
                }
            }
            values.push(value.unwrap_or_else(Rational::zero));
        }
        Self::validate(lattice, values)
    }

    pub fn lattice(&self) -> &'a FiniteOml {
        self.lattice
    }

    pub fn value(&self, e: ElementId) -> &Rational {
        &self.values[e.0]
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }
}

/// Deterministic state with `m(b) = 1`, used as `m_b` when `b` has zero mass.
///
/// Mass is spread uniformly over the atoms of `b` in the first block that
/// contains `b`, the other atoms of that block get 0, and every remaining
/// block spreads whatever mass its already-fixed atoms leave over its free
/// atoms. Returns `None` when this construction does not yield a state.
pub fn canonical_fallback_state(lattice: &FiniteOml, b: ElementId) -> Option<State<'_>> {
    if b == lattice.bottom() {
        return None;
    }
    let blocks = lattice.blocks();
    let first = lattice.blocks_containing(b).next()?;
    let mut weights: BTreeMap<ElementId, Rational> = BTreeMap::new();
    let below: Vec<ElementId> = blocks[first]
        .atoms
        .iter()
        .copied()
        .filter(|&t| lattice.leq(t, b))
        .collect();
    let share = Rational::new(1.into(), below.len().into());
    for &t in &blocks[first].atoms {
        let w = if below.contains(&t) { share.clone() } else { Rational::zero() };
        weights.insert(t, w);
    }
    for block in blocks {
        let fixed: Rational = block.atoms.iter().filter_map(|t| weights.get(t)).sum();
        let free: Vec<ElementId> = block
            .atoms
            .iter()
            .copied()
            .filter(|t| !weights.contains_key(t))
            .collect();
        if free.is_empty() {
            continue;
        }
        let rest = Rational::one() - fixed;
        if rest < Rational::zero() {
            return None;
        }
        let each = rest / Rational::new(free.len().into(), 1.into());
        for t in free {
            weights.insert(t, each.clone());
        }
    }
    let state = State::from_atom_weights(lattice, &weights).ok()?;
    state.value(b).is_one().then_some(state)
}

/// All unordered pairs `a < b` (by index) with `a ⊥ b`, including those
/// involving the bottom element.
pub(crate) fn orthogonal_pairs(lattice: &FiniteOml) -> Vec<(ElementId, ElementId)> {
    let mut out = Vec::new();
    for a in lattice.elements() {
        for b in lattice.elements().skip(a.0 + 1) {
            if lattice.is_orthogonal(a, b) {
                out.push((a, b));
            }
        }
    }
    out
}

/// A bivariate, possibly non-symmetric joint distribution `p(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SMap<'a> {
    lattice: &'a FiniteOml,
    values: Vec<Rational>,
}

impl<'a> SMap<'a> {
    /// Checks s1, s2, s3 and the derived bound p2 on a full table indexed
    /// `[a][b]`.
    pub fn validate(lattice: &'a FiniteOml, table: Vec<Vec<Rational>>) -> Result<Self, SMapError> {
        let n = lattice.len();
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(SMapError::WrongSize { expected: n });
        }
        let values: Vec<Rational> = table.into_iter().flatten().collect();
        let p = SMap { lattice, values };
        p.check_axioms()?;
        Ok(p)
    }

    fn check_axioms(&self) -> Result<(), SMapError> {
        let l = self.lattice;
        let name = |e: ElementId| l.name(e).to_string();
        for a in l.elements() {
            for b in l.elements() {
                let v = self.get(a, b);
                if !is_probability(v) {
                    return Err(SMapError::OutOfRange {
                        a: name(a),
                        b: name(b),
                        value: format_rational(v),
                    });
                }
            }
        }
        let top = self.get(l.top(), l.top());
        if !top.is_one() {
            return Err(SMapError::S1Violated(format_rational(top)));
        }
        for a in l.elements() {
            for b in l.elements() {
                if l.is_orthogonal(a, b) && !self.get(a, b).is_zero() {
                    return Err(SMapError::S2Violated {
                        a: name(a),
                        b: name(b),
                        value: format_rational(self.get(a, b)),
                    });
                }
            }
        }
        for (a1, a2) in orthogonal_pairs(l) {
            let j = l.join(a1, a2);
            for other in l.elements() {
                let lhs = self.get(j, other);
                let rhs = self.get(a1, other) + self.get(a2, other);
                if *lhs != rhs {
                    return Err(SMapError::S3Violated {
                        side: "first",
                        a1: name(a1),
                        a2: name(a2),
                        other: name(other),
                        lhs: format_rational(lhs),
                        rhs: format_rational(&rhs),
                    });
                }
                let lhs = self.get(other, j);
                let rhs = self.get(other, a1) + self.get(other, a2);
                if *lhs != rhs {
                    return Err(SMapError::S3Violated {
                        side: "second",
                        a1: name(a1),
                        a2: name(a2),
                        other: name(other),
                        lhs: format_rational(lhs),
                        rhs: format_rational(&rhs),
                    });
                }
            }
        }
        for a in l.elements() {
            for b in l.elements() {
                if self.get(a, b) > self.get(a, a) {
                    return Err(SMapError::P2Violated {
                        a: name(a),
                        b: name(b),
                        value: format_rational(self.get(a, b)),
                        diagonal: format_rational(self.get(a, a)),
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds the full table from values on pairs of atoms.
    ///
    /// Pairs missing from `atom_values` default to the marginal on the
    /// diagonal and to 0 for orthogonal atoms; any other missing pair is an
    /// error. Every alternative decomposition of each element must give the
    /// same value, and the result must reproduce `marginal` in both arguments.
    pub fn from_atom_table(
        lattice: &'a FiniteOml,
        atom_values: &BTreeMap<(ElementId, ElementId), Rational>,
        marginal: &State<'_>,
    ) -> Result<Self, SMapError> {
        let name = |e: ElementId| lattice.name(e).to_string();
        let atom_pair = |x: ElementId, y: ElementId| -> Result<Rational, SMapError> {
            if let Some(v) = atom_values.get(&(x, y)) {
                Ok(v.clone())
            } else if x == y {
                Ok(marginal.value(x).clone())
            } else if lattice.is_orthogonal(x, y) {
                Ok(Rational::zero())
            } else {
                Err(SMapError::MissingAtomPair(name(x), name(y)))
            }
        };
        let decompositions: Vec<Vec<Vec<ElementId>>> = lattice
            .elements()
            .map(|e| {
                lattice
                    .atom_decompositions(e)
                    .into_iter()
                    .map(|d| d.atoms)
                    .collect()
            })
            .collect();
        let n = lattice.len();
        let mut values = vec![Rational::zero(); n * n];
        // Column-major, so a bad column entry is reported against the first
        // row element that exposes it.
        for column in lattice.elements() {
            for row in lattice.elements() {
                let mut value: Option<Rational> = None;
                for dr in &decompositions[row.0] {
                    for dc in &decompositions[column.0] {
                        let mut sum = Rational::zero();
                        for &x in dr {
                            for &y in dc {
                                sum += atom_pair(x, y)?;
                            }
                        }
                        match &value {
                            None => value = Some(sum),
                            Some(v) if *v != sum => {
                                return Err(SMapError::DecompositionMismatch {
                                    row: name(row),
                                    column: name(column),
                                    first: format_rational(v),
                                    second: format_rational(&sum),
                                })
                            }
                            Some(_) => {}
                        }
                    }
                }
                values[row.0 * n + column.0] = value.unwrap_or_else(Rational::zero);
            }
        }
        let p = SMap { lattice, values };
        p.check_axioms()?;
        let top = lattice.top();
        for &atom in lattice.atoms() {
            for table in [p.get(atom, top), p.get(top, atom), p.get(atom, atom)] {
                if table != marginal.value(atom) {
                    return Err(SMapError::MarginalInconsistent {
                        element: name(atom),
                        marginal: format_rational(marginal.value(atom)),
                        table: format_rational(table),
                    });
                }
            }
        }
        Ok(p)
    }

    pub fn lattice(&self) -> &'a FiniteOml {
        self.lattice
    }

    pub fn get(&self, a: ElementId, b: ElementId) -> &Rational {
        &self.values[a.0 * self.lattice.len() + b.0]
    }

    /// `μ_p(a) = p(a, a)`.
    pub fn mass(&self, a: ElementId) -> &Rational {
        self.get(a, a)
    }

    /// The diagonal state `μ_p`.
    pub fn mu(&self) -> State<'a> {
        let top = self.lattice.top();
        let values: Vec<Rational> = self
            .lattice
            .elements()
            .map(|a| {
                debug_assert_eq!(self.get(a, top), self.get(a, a));
                debug_assert_eq!(self.get(top, a), self.get(a, a));
                self.get(a, a).clone()
            })
            .collect();
        State::validate(self.lattice, values).expect("diagonal of a validated s-map is a state")
    }

    pub fn table(&self) -> Vec<Vec<Rational>> {
        let n = self.lattice.len();
        self.values.chunks(n).map(<[Rational]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.lattice
            .elements()
            .all(|a| self.lattice.elements().all(|b| self.get(a, b) == self.get(b, a)))
    }

    /// "`b` is independent of `a`": `p(b, a) = p(b, b) p(a, a)`.
    pub fn is_independent(&self, b: ElementId, a: ElementId) -> Independence {
        let lhs = self.get(b, a).clone();
        let rhs = self.mass(b) * self.mass(a);
        Independence {
            independent: lhs == rhs,
            lhs,
            rhs,
            determinate: !self.mass(a).is_zero(),
        }
    }

    /// Conditional state `f_p(a|b) = p(a, b) / p(b, b)`, falling back to a
    /// state concentrated on `b` when `p(b, b) = 0`.
    pub fn conditional(
        &self,
        supplied: &BTreeMap<ElementId, State<'_>>,
    ) -> Result<ConditionalState<'a>, ConditionalError> {
        let l = self.lattice;
        let mut rows = Vec::with_capacity(l.len());
        let mut fallbacks = Vec::new();
        for b in l.elements() {
            if b == l.bottom() {
                rows.push(None);
                continue;
            }
            let mass = self.mass(b);
            if !mass.is_zero() {
                rows.push(Some(l.elements().map(|a| self.get(a, b) / mass).collect()));
                continue;
            }
            let (state, source) = match supplied.get(&b) {
                Some(m) => {
                    if !m.value(b).is_one() {
                        return Err(ConditionalError::FallbackNotConcentrated {
                            conditioner: l.name(b).into(),
                            value: format_rational(m.value(b)),
                        });
                    }
                    (m.values().to_vec(), FallbackSource::Supplied)
                }
                None => {
                    let m = canonical_fallback_state(l, b)
                        .ok_or_else(|| ConditionalError::NoFallbackState(l.name(b).into()))?;
                    (m.values().to_vec(), FallbackSource::Canonical)
                }
            };
            fallbacks.push(FallbackUse { conditioner: b, source });
            rows.push(Some(state));
        }
        let mut f = ConditionalState::validate(l, rows)?;
        f.fallbacks = fallbacks;
        Ok(f)
    }

    /// Exhaustive scan for order dependence and one-way independence.
    pub fn classify(&self) -> CausalityReport {
        let l = self.lattice;
        let inner: Vec<ElementId> = l
            .elements()
            .filter(|&e| e != l.bottom() && e != l.top())
            .collect();
        let mut causal_witnesses = Vec::new();
        for (i, &a) in inner.iter().enumerate() {
            for &b in &inner[i + 1..] {
                if self.get(a, b) != self.get(b, a) {
                    causal_witnesses.push(CausalWitness {
                        a,
                        b,
                        p_ab: self.get(a, b).clone(),
                        p_ba: self.get(b, a).clone(),
                    });
                }
            }
        }
        let mut dependence_witnesses = Vec::new();
        let mut indeterminate = 0;
        for &a in &inner {
            for &b in &inner {
                if a == b {
                    continue;
                }
                let a_on_b = self.is_independent(a, b);
                let b_on_a = self.is_independent(b, a);
                if !a_on_b.independent && b_on_a.independent {
                    if !b_on_a.determinate {
                        indeterminate += 1;
                        continue;
                    }
                    dependence_witnesses.push(OneWayDependence {
                        dependent: a,
                        on: b,
                        p_dependent: a_on_b.lhs,
                        product: a_on_b.rhs,
                        p_independent: b_on_a.lhs,
                    });
                }
            }
        }
        let certain: Vec<ElementId> = inner
            .iter()
            .copied()
            .filter(|&e| self.mass(e).is_one())
            .collect();
        let mut jauch_piron_notes = Vec::new();
        for (i, &a) in certain.iter().enumerate() {
            for &b in &certain[i + 1..] {
                jauch_piron_notes.push((a, b));
            }
        }
        let classification = if causal_witnesses.is_empty() {
            Classification::Symmetric
        } else if dependence_witnesses.is_empty() {
            Classification::Causal
        } else {
            Classification::StronglyCausal
        };
        CausalityReport {
            classification,
            causal_witnesses,
            dependence_witnesses,
            indeterminate_pairs: indeterminate,
            jauch_piron_notes,
        }
    }

    /// Checks p1–p4, the marginal identity and the Jauch–Piron property.
    pub fn check_properties(&self) -> PropertyReport {
        let l = self.lattice;
        let name = |e: ElementId| l.name(e).to_string();
        let fmt = format_rational;
        let mut report = PropertyReport::default();

        let p1 = State::validate(l, l.elements().map(|a| self.mass(a).clone()).collect());
        report.push("p1", "mu_p is a state", 1, p1.err().map(|e| e.to_string()));

        let top = l.top();
        let mut checked = 0;
        let mut witness = None;
        for a in l.elements() {
            checked += 1;
            if self.get(a, top) != self.mass(a) || self.get(top, a) != self.mass(a) {
                witness.get_or_insert_with(|| {
                    format!(
                        "p({0}, 1) = {1}, p(1, {0}) = {2}, p({0}, {0}) = {3}",
                        name(a),
                        fmt(self.get(a, top)),
                        fmt(self.get(top, a)),
                        fmt(self.mass(a))
                    )
                });
            }
        }
        report.push("marginal", "p(a, 1) = p(1, a) = p(a, a)", checked, witness);

        let mut checked = 0;
        let mut witness = None;
        for a in l.elements() {
            for b in l.elements() {
                checked += 1;
                if self.get(a, b) > self.mass(a) {
                    witness.get_or_insert_with(|| {
                        format!("p({}, {}) = {} > {}", name(a), name(b), fmt(self.get(a, b)), fmt(self.mass(a)))
                    });
                }
            }
        }
        report.push("p2", "p(a, b) <= p(a, a)", checked, witness);

        let mut checked = 0;
        let mut witness = None;
        for a in l.elements() {
            for b in l.elements() {
                if !l.is_compatible(a, b) {
                    continue;
                }
                checked += 1;
                let m = l.meet(a, b);
                if self.get(a, b) != self.mass(m) {
                    witness.get_or_insert_with(|| {
                        format!(
                            "p({}, {}) = {} but mu({}) = {}",
                            name(a),
                            name(b),
                            fmt(self.get(a, b)),
                            name(m),
                            fmt(self.mass(m))
                        )
                    });
                }
            }
        }
        report.push("p3", "compatible a, b: p(a, b) = mu_p(a ^ b)", checked, witness);

        // p4 compares the conditional-state formulation f_p(b|1) = f_p(b|a)
        // with the product formulation; only conditioners of positive mass
        // have a fallback-independent f_p(.|a).
        let mut checked = 0;
        let mut witness = None;
        for a in l.elements() {
            let mass_a = self.mass(a);
            if mass_a.is_zero() {
                continue;
            }
            for b in l.elements() {
                checked += 1;
                let prior = self.get(b, top) / self.mass(top);
                let posterior = self.get(b, a) / mass_a;
                let conditional_form = prior == posterior;
                let product_form = self.is_independent(b, a).independent;
                if conditional_form != product_form {
                    witness.get_or_insert_with(|| format!("b = {}, a = {}", name(b), name(a)));
                }
            }
        }
        report.push("p4", "f_p(b|1) = f_p(b|a) iff p(b, a) = p(b, b) p(a, a)", checked, witness);

        let mut checked = 0;
        let mut witness = None;
        let certain: Vec<ElementId> = l.elements().filter(|&e| self.mass(e).is_one()).collect();
        for &a in &certain {
            for &b in &certain {
                checked += 1;
                if !self.get(a, b).is_one() || !self.get(b, a).is_one() {
                    witness.get_or_insert_with(|| format!("p({}, {}) != 1", name(a), name(b)));
                }
                for c in l.elements() {
                    if self.get(a, c) != self.get(c, a) {
                        witness.get_or_insert_with(|| {
                            format!("mu({}) = 1 but p({0}, {1}) != p({1}, {0})", name(a), name(c))
                        });
                    }
                }
            }
        }
        report.push(
            "jauch_piron",
            "mu_p(a) = mu_p(b) = 1 implies p(a, b) = p(b, a) = 1 and p(a, c) = p(c, a)",
            checked,
            witness,
        );
        report
    }
}

/// Both sides of the product test for "`b` is independent of `a`".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Independence {
    pub independent: bool,
    /// `p(b, a)`.
    pub lhs: Rational,
    /// `p(b, b) p(a, a)`.
    pub rhs: Rational,
    /// False when `μ_p(a) = 0`: the conditional-state reading then depends on
    /// the fallback state chosen for `a`.
    pub determinate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Symmetric,
    Causal,
    StronglyCausal,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Symmetric => "symmetric",
            Classification::Causal => "causal",
            Classification::StronglyCausal => "strongly_causal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalWitness {
    pub a: ElementId,
    pub b: ElementId,
    pub p_ab: Rational,
    pub p_ba: Rational,
}

/// `dependent` depends on `on`, while `on` is independent of `dependent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneWayDependence {
    pub dependent: ElementId,
    pub on: ElementId,
    /// `p(dependent, on)`.
    pub p_dependent: Rational,
    /// `μ_p(dependent) μ_p(on)`.
    pub product: Rational,
    /// `p(on, dependent)`, equal to `product`.
    pub p_independent: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalityReport {
    pub classification: Classification,
    pub causal_witnesses: Vec<CausalWitness>,
    pub dependence_witnesses: Vec<OneWayDependence>,
    /// One-way candidates skipped because the independent side conditions on
    /// a zero-mass element.
    pub indeterminate_pairs: usize,
    /// Pairs of non-top elements that both have `μ_p = 1`.
    pub jauch_piron_notes: Vec<(ElementId, ElementId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub(crate) fn push(
        &mut self,
        name: &'static str,
        statement: &'static str,
        checked: usize,
        witness: Option<String>,
    ) {
        self.checks.push(PropertyCheck {
            name,
            statement,
            passed: witness.is_none(),
            checked,
            witness,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackSource {
    Canonical,
    Supplied,
}

/// Records that `f(.|conditioner)` came from a fallback state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FallbackUse {
    pub conditioner: ElementId,
    pub source: FallbackSource,
}

/// `f(a|b)` for every `a` and every non-bottom `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalState<'a> {
    lattice: &'a FiniteOml,
    /// Indexed by conditioner; `None` only at the bottom element.
    rows: Vec<Option<Vec<Rational>>>,
    fallbacks: Vec<FallbackUse>,
}

impl<'a> ConditionalState<'a> {
    /// Checks c1–c3. `rows[b]` is the slice `f(.|b)`; the bottom row is ignored.
    pub fn validate(
        lattice: &'a FiniteOml,
        mut rows: Vec<Option<Vec<Rational>>>,
    ) -> Result<Self, ConditionalError> {
        let l = lattice;
        if rows.len() != l.len() {
            return Err(ConditionalError::WrongSize {
                expected: l.len(),
                got: rows.len(),
            });
        }
        rows[l.bottom().0] = None;
        let name = |e: ElementId| l.name(e).to_string();
        for b in l.elements().filter(|&b| b != l.bottom()) {
            let row = rows[b.0]
                .as_ref()
                .ok_or_else(|| ConditionalError::MissingConditioner(name(b)))?;
            State::validate(l, row.clone()).map_err(|source| ConditionalError::C1Violated {
                conditioner: name(b),
                source,
            })?;
            if !row[b.0].is_one() {
                return Err(ConditionalError::C2Violated {
                    conditioner: name(b),
                    value: format_rational(&row[b.0]),
                });
            }
        }
        let f = |a: ElementId, b: ElementId| &rows[b.0].as_ref().expect("non-bottom row")[a.0];
        for (a1, a2) in orthogonal_pairs(l) {
            if a1 == l.bottom() || a2 == l.bottom() {
                continue;
            }
            let j = l.join(a1, a2);
            for b in l.elements() {
                let lhs = f(b, j);
                let rhs = f(b, a1) * f(a1, j) + f(b, a2) * f(a2, j);
                if *lhs != rhs {
                    return Err(ConditionalError::C3Violated {
                        a1: name(a1),
                        a2: name(a2),
                        b: name(b),
                        lhs: format_rational(lhs),
                        rhs: format_rational(&rhs),
                    });
                }
            }
        }
        Ok(ConditionalState {
            lattice,
            rows,
            fallbacks: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &'a FiniteOml {
        self.lattice
    }

    /// `f(a|b)`; `None` when `b` is the bottom element.
    pub fn get(&self, a: ElementId, b: ElementId) -> Option<&Rational> {
        self.rows[b.0].as_ref().map(|row| &row[a.0])
    }

    pub fn fallbacks(&self) -> &[FallbackUse] {
        &self.fallbacks
    }

    /// `p(a, b) = f(a|b) f(b|1)`, with `p(a, 0) = 0`.
    pub fn to_smap(&self) -> Result<SMap<'a>, SMapError> {
        let l = self.lattice;
        let top = l.top();
        let table = l
            .elements()
            .map(|a| {
                l.elements()
                    .map(|b| match self.get(a, b) {
                        None => Rational::zero(),
                        Some(fab) => fab * self.get(b, top).expect("top row"),
                    })
                    .collect()
            })
            .collect();
        SMap::validate(l, table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{integer, parse_rational, rational};

    fn l1() -> FiniteOml {
        let ba = |a: &str, b: &str| FiniteOml::boolean_algebra(&[a, b]).unwrap();
        FiniteOml::horizontal_sum(&[ba("a", "a'"), ba("b", "b'")]).unwrap()
    }

    fn state_on<'a>(l: &'a FiniteOml, pairs: &[(&str, &str)]) -> Result<State<'a>, StateError> {
        let mut values = vec![Rational::zero(); l.len()];
        values[l.top().0] = integer(1);
        for (e, v) in pairs {
            values[l.element(e).unwrap().0] = parse_rational(v).unwrap();
        }
        State::validate(l, values)
    }

    #[test]
    fn table_one_marginal_is_a_state() {
        let l = l1();
        assert!(state_on(&l, &[("a", "0.3"), ("a'", "0.7"), ("b", "0.5"), ("b'", "0.5")]).is_ok());
    }

    #[test]
    fn state_errors() {
        let l = l1();
        match state_on(&l, &[("a", "0.3"), ("a'", "0.6"), ("b", "0.5"), ("b'", "0.5")]) {
            Err(StateError::AdditivityViolated { a, b, .. }) => assert_eq!((a.as_str(), b.as_str()), ("a", "a'")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            state_on(&l, &[("a", "1.3"), ("a'", "0.7")]),
            Err(StateError::OutOfRange { .. })
        ));
        let mut values = vec![Rational::zero(); l.len()];
        values[l.top().0] = rational(1, 2);
        assert!(matches!(State::validate(&l, values), Err(StateError::NotNormalized(_))));
    }

    #[test]
    fn canonical_fallback_concentrates_on_target() {
        let l = l1();
        let a = l.element("a").unwrap();
        let m = canonical_fallback_state(&l, a).unwrap();
        assert_eq!(m.value(a), &integer(1));
        assert_eq!(m.value(l.element("b").unwrap()), &rational(1, 2));
        assert!(canonical_fallback_state(&l, l.bottom()).is_none());
    }

    #[test]
    fn product_conditional_fails_c2() {
        // f(a|b) = m(a) is not concentrated on its conditioner.
        let l = FiniteOml::boolean_algebra(&["x", "y", "z"]).unwrap();
        let weights = [rational(1, 2), rational(1, 3), rational(1, 6)];
        let w: BTreeMap<ElementId, Rational> =
            l.atoms().iter().copied().zip(weights.iter().cloned()).collect();
        let m = State::from_atom_weights(&l, &w).unwrap();
        let rows = l.elements().map(|_| Some(m.values().to_vec())).collect();
        assert!(matches!(
            ConditionalState::validate(&l, rows),
            Err(ConditionalError::C2Violated { .. })
        ));
    }

    #[test]
    fn boolean_algebra_smaps_are_symmetric() {
        let l = FiniteOml::boolean_algebra(&["x", "y", "z"]).unwrap();
        let weights = [rational(1, 2), rational(1, 3), rational(1, 6)];
        let w: BTreeMap<ElementId, Rational> =
            l.atoms().iter().copied().zip(weights.iter().cloned()).collect();
        let m = State::from_atom_weights(&l, &w).unwrap();
        let table: Vec<Vec<Rational>> = l
            .elements()
            .map(|a| l.elements().map(|b| m.value(l.meet(a, b)).clone()).collect())
            .collect();
        let p = SMap::validate(&l, table).unwrap();
        assert!(p.is_symmetric());
        assert_eq!(p.classify().classification, Classification::Symmetric);
        assert!(p.check_properties().all_passed());
        let f = p.conditional(&BTreeMap::new()).unwrap();
        assert_eq!(f.to_smap().unwrap(), p);
    }

    #[test]
    fn zero_mass_conditioner_uses_canonical_fallback() {
        let l = FiniteOml::boolean_algebra(&["x", "y", "z"]).unwrap();
        let weights = [rational(1, 2), rational(1, 2), rational(0, 1)];
        let w: BTreeMap<ElementId, Rational> =
            l.atoms().iter().copied().zip(weights.iter().cloned()).collect();
        let m = State::from_atom_weights(&l, &w).unwrap();
        let table: Vec<Vec<Rational>> = l
            .elements()
            .map(|a| l.elements().map(|b| m.value(l.meet(a, b)).clone()).collect())
            .collect();
        let p = SMap::validate(&l, table).unwrap();
        let z = l.element("z").unwrap();
        let f = p.conditional(&BTreeMap::new()).unwrap();
        assert_eq!(f.fallbacks(), &[FallbackUse { conditioner: z, source: FallbackSource::Canonical }]);
        assert_eq!(f.get(z, z), Some(&integer(1)));
        assert_eq!(f.get(z, l.bottom()), None);
        // the round trip still reproduces p, including the zero-mass column
        assert_eq!(f.to_smap().unwrap(), p);
        assert!(!p.is_independent(z, z).determinate);
    }

    #[test]
    fn supplied_fallback_must_be_concentrated() {
        let l = FiniteOml::boolean_algebra(&["x", "y"]).unwrap();
        let x = l.element("x").unwrap();
        let y = l.element("y").unwrap();
        let table = l
            .elements()
            .map(|a| l.elements().map(|b| if l.leq(x, l.meet(a, b)) { integer(1) } else { integer(0) }).collect())
            .collect();
        let p = SMap::validate(&l, table).unwrap();
        let wrong = canonical_fallback_state(&l, x).unwrap();
        let supplied = BTreeMap::from([(y, wrong)]);
        assert!(matches!(
            p.conditional(&supplied),
            Err(ConditionalError::FallbackNotConcentrated { .. })
        ));
    }
}
