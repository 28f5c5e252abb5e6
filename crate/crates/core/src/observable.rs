//! Finite-spectrum observables, conditional expectation and the summability
//! operator for observables that are not compatible.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::lattice::{ElementId, FiniteOml};
use crate::rational::{format_rational, Rational};
use crate::state::{canonical_fallback_state, PropertyReport, SMap, State};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObservableError {
    #[error("an observable needs a non-empty support")]
    Empty,
    #[error("spectrum value {0} appears twice")]
    DuplicateSpectrumValue(String),
    #[error("spectrum value {0} is assigned the bottom element")]
    BottomInSupport(String),
    #[error("support elements {a} and {b} are not orthogonal")]
    NotOrthogonal { a: String, b: String },
    #[error("support elements join to {0}, not 1")]
    JoinNotTop(String),
    #[error("{a} and {b} are not compatible")]
    NotCompatible { a: String, b: String },
    #[error("generated subalgebra is not Boolean: {a} and {b} are not compatible")]
    NotBoolean { a: String, b: String },
    #[error("conditioning atom {0} has zero mass and no concentrated fallback state exists")]
    ZeroMassConditioner(String),
}

/// Finite-spectrum observable: distinct values on pairwise orthogonal,
/// non-bottom elements whose join is the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observable<'a> {
    lattice: &'a FiniteOml,
    /// Sorted by spectrum value.
    support: Vec<(Rational, ElementId)>,
}

impl<'a> Observable<'a> {
    pub fn validate(
        lattice: &'a FiniteOml,
        mut support: Vec<(Rational, ElementId)>,
    ) -> Result<Self, ObservableError> {
        if support.is_empty() {
            return Err(ObservableError::Empty);
        }
        support.sort_by(|x, y| x.0.cmp(&y.0));
        for w in support.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ObservableError::DuplicateSpectrumValue(format_rational(&w[0].0)));
            }
        }
        let name = |e: ElementId| lattice.name(e).to_string();
        if let Some((v, _)) = support.iter().find(|(_, e)| *e == lattice.bottom()) {
            return Err(ObservableError::BottomInSupport(format_rational(v)));
        }
        for (i, (_, a)) in support.iter().enumerate() {
            for (_, b) in &support[i + 1..] {
                if !lattice.is_orthogonal(*a, *b) {
                    return Err(ObservableError::NotOrthogonal { a: name(*a), b: name(*b) });
                }
            }
        }
        let join = support
            .iter()
            .fold(lattice.bottom(), |acc, (_, e)| lattice.join(acc, *e));
        if join != lattice.top() {
            return Err(ObservableError::JoinNotTop(name(join)));
        }
        Ok(Observable { lattice, support })
    }

    /// Two-point observable: 1 on `e`, 0 on its complement.
    pub fn indicator(lattice: &'a FiniteOml, e: ElementId) -> Result<Self, ObservableError> {
        if e == lattice.top() {
            return Self::constant(lattice, Rational::from_integer(1.into()));
        }
        Self::validate(
            lattice,
            vec![
                (Rational::from_integer(1.into()), e),
                (Rational::zero(), lattice.ortho(e)),
            ],
        )
    }

    pub fn constant(lattice: &'a FiniteOml, value: Rational) -> Result<Self, ObservableError> {
        Self::validate(lattice, vec![(value, lattice.top())])
    }

    pub fn lattice(&self) -> &'a FiniteOml {
        self.lattice
    }

    pub fn support(&self) -> &[(Rational, ElementId)] {
        &self.support
    }

    /// Spectrum values in increasing order.
    pub fn spectrum(&self) -> Vec<Rational> {
        self.support.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn range(&self) -> RangeAlgebra<'a> {
        let generators: Vec<ElementId> = self.support.iter().map(|(_, e)| *e).collect();
        RangeAlgebra::generated_by(self.lattice, &generators)
            .expect("orthogonal generators span a Boolean subalgebra")
    }

    pub fn is_compatible_with(&self, other: &Observable<'_>) -> bool {
        self.support.iter().all(|(_, a)| {
            other
                .support
                .iter()
                .all(|(_, b)| self.lattice.is_compatible(*a, *b))
        })
    }

    /// Distribution `v ↦ m(x({v}))` under the state `m`.
    pub fn distribution(&self, m: &State<'_>) -> Vec<(Rational, Rational)> {
        self.support
            .iter()
            .map(|(v, e)| (v.clone(), m.value(*e).clone()))
            .collect()
    }

    /// `E_p(x) = Σ v μ_p(x({v}))`.
    pub fn expectation(&self, p: &SMap<'_>) -> Rational {
        self.support.iter().map(|(v, e)| v * p.mass(*e)).sum()
    }

    /// Builds an observable from per-element values, joining elements that
    /// share a value.
    fn merged(
        lattice: &'a FiniteOml,
        entries: impl IntoIterator<Item = (Rational, ElementId)>,
    ) -> Result<Self, ObservableError> {
        let mut by_value: BTreeMap<Rational, ElementId> = BTreeMap::new();
        for (v, e) in entries {
            let slot = by_value.entry(v).or_insert(lattice.bottom());
            *slot = lattice.join(*slot, e);
        }
        Self::validate(lattice, by_value.into_iter().collect())
    }
}

/// Boolean subalgebra generated by a set of pairwise compatible elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeAlgebra<'a> {
    lattice: &'a FiniteOml,
    elements: Vec<ElementId>,
    atoms: Vec<ElementId>,
}

impl<'a> RangeAlgebra<'a> {
    pub fn generated_by(
        lattice: &'a FiniteOml,
        generators: &[ElementId],
    ) -> Result<Self, ObservableError> {
        let mut members: Vec<ElementId> = vec![lattice.bottom(), lattice.top()];
        members.extend_from_slice(generators);
        members.sort();
        members.dedup();
        loop {
            let mut next = members.clone();
            for &a in &members {
                next.push(lattice.ortho(a));
                for &b in &members {
                    next.push(lattice.meet(a, b));
                    next.push(lattice.join(a, b));
                }
            }
            next.sort();
            next.dedup();
            if next.len() == members.len() {
                break;
            }
            members = next;
        }
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                if !lattice.is_compatible(a, b) {
                    return Err(ObservableError::NotBoolean {
                        a: lattice.name(a).into(),
                        b: lattice.name(b).into(),
                    });
                }
            }
        }
        let atoms = members
            .iter()
            .copied()
            .filter(|&a| {
                a != lattice.bottom()
                    && members
                        .iter()
                        .all(|&c| c == lattice.bottom() || c == a || !lattice.leq(c, a))
            })
            .collect();
        Ok(RangeAlgebra { lattice, elements: members, atoms })
    }

    pub fn elements(&self) -> &[ElementId] {
        &self.elements
    }

    pub fn atoms(&self) -> &[ElementId] {
        &self.atoms
    }

    pub fn contains(&self, e: ElementId) -> bool {
        self.elements.binary_search(&e).is_ok()
    }

    pub fn is_subset_of(&self, other: &RangeAlgebra<'_>) -> bool {
        self.elements.iter().all(|&e| other.contains(e))
    }
}

/// An observable produced by conditioning, with the atoms whose conditional
/// mean came from a fallback state because they carry zero mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conditioned<'a> {
    pub observable: Observable<'a>,
    pub zero_mass_atoms: Vec<ElementId>,
}

/// `E_p(x|a) = Σ v f_p(x({v})|a)`.
///
/// For `μ_p(a) = 0` the canonical fallback state concentrated on `a` stands in
/// for `f_p(.|a)`; the returned flag says so.
pub fn conditional_mean(
    p: &SMap<'_>,
    x: &Observable<'_>,
    a: ElementId,
) -> Result<(Rational, bool), ObservableError> {
    let mass = p.mass(a);
    if !mass.is_zero() {
        let total: Rational = x.support.iter().map(|(v, e)| v * p.get(*e, a)).sum();
        return Ok((total / mass, false));
    }
    let l = p.lattice();
    let m = canonical_fallback_state(l, a)
        .ok_or_else(|| ObservableError::ZeroMassConditioner(l.name(a).into()))?;
    Ok((x.support.iter().map(|(v, e)| v * m.value(*e)).sum(), true))
}

/// `E_p(x|B)`: the observable on the atoms of `B` taking the conditional mean
/// of `x` on each atom. Atoms with equal means are joined.
pub fn conditional_expectation<'a>(
    p: &SMap<'a>,
    x: &Observable<'_>,
    subalgebra: &RangeAlgebra<'_>,
) -> Result<Conditioned<'a>, ObservableError> {
    let mut entries = Vec::with_capacity(subalgebra.atoms.len());
    let mut zero_mass_atoms = Vec::new();
    for &a in &subalgebra.atoms {
        let (mean, fallback) = conditional_mean(p, x, a)?;
        if fallback {
            zero_mass_atoms.push(a);
        }
        entries.push((mean, a));
    }
    Ok(Conditioned {
        observable: Observable::merged(p.lattice(), entries)?,
        zero_mass_atoms,
    })
}

/// Summability operator `⊕_p(x, y) = E_p(x|y) + y`, evaluated atom by atom
/// inside the range of `y`.
pub fn oplus<'a>(
    p: &SMap<'a>,
    x: &Observable<'_>,
    y: &Observable<'_>,
) -> Result<Conditioned<'a>, ObservableError> {
    let mut entries = Vec::with_capacity(y.support.len());
    let mut zero_mass_atoms = Vec::new();
    for (value, a) in &y.support {
        let (mean, fallback) = conditional_mean(p, x, *a)?;
        if fallback {
            zero_mass_atoms.push(*a);
        }
        entries.push((mean + value, *a));
    }
    Ok(Conditioned {
        observable: Observable::merged(p.lattice(), entries)?,
        zero_mass_atoms,
    })
}

/// `⊕_p^B(x, y) := E_p(x|B) + E_p(y|B)`, added inside `B`.
pub fn oplus_within<'a>(
    p: &SMap<'a>,
    x: &Observable<'_>,
    y: &Observable<'_>,
    subalgebra: &RangeAlgebra<'_>,
) -> Result<Conditioned<'a>, ObservableError> {
    let mut entries = Vec::with_capacity(subalgebra.atoms.len());
    let mut zero_mass_atoms = Vec::new();
    for &a in &subalgebra.atoms {
        let (mx, fx) = conditional_mean(p, x, a)?;
        let (my, _) = conditional_mean(p, y, a)?;
        if fx {
            zero_mass_atoms.push(a);
        }
        entries.push((mx + my, a));
    }
    Ok(Conditioned {
        observable: Observable::merged(p.lattice(), entries)?,
        zero_mass_atoms,
    })
}

/// Classical sum of compatible observables over the common refinement of
/// their ranges.
pub fn sum_compatible<'a>(
    x: &Observable<'a>,
    y: &Observable<'_>,
) -> Result<Observable<'a>, ObservableError> {
    let l = x.lattice;
    for (_, a) in &x.support {
        for (_, b) in &y.support {
            if !l.is_compatible(*a, *b) {
                return Err(ObservableError::NotCompatible {
                    a: l.name(*a).into(),
                    b: l.name(*b).into(),
                });
            }
        }
    }
    let mut entries = Vec::new();
    for (vx, a) in &x.support {
        for (vy, b) in &y.support {
            let m = l.meet(*a, *b);
            if m != l.bottom() {
                entries.push((vx + vy, m));
            }
        }
    }
    Observable::merged(l, entries)
}

/// `Σ_i Σ_j (x_i + y_j) p(x({x_i}), y({y_j}))`.
pub fn joint_sum_expectation(p: &SMap<'_>, x: &Observable<'_>, y: &Observable<'_>) -> Rational {
    let mut total = Rational::zero();
    for (vx, a) in &x.support {
        for (vy, b) in &y.support {
            total += (vx + vy) * p.get(*a, *b);
        }
    }
    total
}

/// Checks d1 and e1–e4 for `x`, `y`, plus the tower property, using
/// `subalgebra` (default: the range of `y`) for the subalgebra variants.
///
/// e2 and the subalgebra half of e3 use [`oplus_within`] as the meaning of
/// `⊕_p^B`.
pub fn check_oplus_properties(
    p: &SMap<'_>,
    x: &Observable<'_>,
    y: &Observable<'_>,
    subalgebra: Option<&RangeAlgebra<'_>>,
) -> Result<PropertyReport, ObservableError> {
    let default_b;
    let b = match subalgebra {
        Some(b) => b,
        None => {
            default_b = y.range();
            &default_b
        }
    };
    let mut report = PropertyReport::default();
    let ex = x.expectation(p);
    let ey = y.expectation(p);
    let expected_sum = &ex + &ey;

    let xy = oplus(p, x, y)?;
    let yx = oplus(p, y, x)?;
    let d1 = xy.observable.range().is_subset_of(&y.range());
    report.push(
        "d1",
        "R(oplus_p(x, y)) is contained in R(y)",
        1,
        (!d1).then(|| "range escapes R(y)".to_string()),
    );

    if x.is_compatible_with(y) {
        let ok = xy.observable.is_compatible_with(&yx.observable);
        report.push(
            "e1",
            "x <-> y implies oplus_p(x, y) <-> oplus_p(y, x)",
            1,
            (!ok).then(|| "sums are not compatible".to_string()),
        );
    } else {
        report.push("e1", "x <-> y implies oplus_p(x, y) <-> oplus_p(y, x) (x, y not compatible)", 0, None);
    }

    let bxy = oplus_within(p, x, y, b)?;
    let byx = oplus_within(p, y, x, b)?;
    report.push(
        "e2",
        "oplus_p^B(x, y) = oplus_p^B(y, x), with oplus_p^B(x, y) := E_p(x|B) + E_p(y|B)",
        1,
        (bxy.observable != byx.observable).then(|| "subalgebra sums differ".to_string()),
    );

    let e_xy = xy.observable.expectation(p);
    let e_bxy = bxy.observable.expectation(p);
    let mut witness = None;
    if e_xy != expected_sum {
        witness = Some(format!(
            "E(oplus(x, y)) = {} but E(x) + E(y) = {}",
            format_rational(&e_xy),
            format_rational(&expected_sum)
        ));
    } else if e_bxy != expected_sum {
        witness = Some(format!(
            "E(oplus^B(x, y)) = {} but E(x) + E(y) = {}",
            format_rational(&e_bxy),
            format_rational(&expected_sum)
        ));
    }
    report.push("e3", "E_p(oplus_p^B(x, y)) = E_p(oplus_p(x, y)) = E_p(x) + E_p(y), with oplus_p^B as in e2", 2, witness);

    let joint = joint_sum_expectation(p, x, y);
    report.push(
        "e4",
        "sum_ij (x_i + y_j) p(x({x_i}), y({y_j})) = E_p(x) + E_p(y)",
        x.support.len() * y.support.len(),
        (joint != expected_sum).then(|| {
            format!(
                "double sum = {} but E(x) + E(y) = {}",
                format_rational(&joint),
                format_rational(&expected_sum)
            )
        }),
    );

    let z = conditional_expectation(p, x, b)?;
    let ez = z.observable.expectation(p);
    let contained = z.observable.range().is_subset_of(b);
    let witness = if ez != ex {
        Some(format!("E(E(x|B)) = {} but E(x) = {}", format_rational(&ez), format_rational(&ex)))
    } else if !contained {
        Some("R(E(x|B)) is not contained in B".to_string())
    } else {
        None
    };
    report.push("tower", "E_p(E_p(x|B)) = E_p(x) and R(E_p(x|B)) is contained in B", 2, witness);
    Ok(report)
}
