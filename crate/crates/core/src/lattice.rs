//! Finite orthomodular lattices.
//!
//! A [`FiniteOml`] is built from raw tables (element names, order relation,
//! orthocomplement) by [`FiniteOml::validate`], which checks every axiom by
//! exhaustive enumeration and derives the meet, join, atom and compatibility
//! tables plus the block decomposition. After validation the value is
//! immutable and every query is a table lookup.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of an element inside its owning lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementId(pub usize);

impl ElementId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub const BOTTOM_NAME: &str = "0";
pub const TOP_NAME: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("malformed lattice tables: {0}")]
    Malformed(String),
    #[error("duplicate element name {0:?}")]
    DuplicateName(String),
    #[error("name {name:?} is reserved for the {role} element")]
    ReservedName { name: String, role: &'static str },
    #[error("order is not a partial order: {0}")]
    NotAPartialOrder(String),
    #[error("order has no unique {0} element")]
    NotBounded(&'static str),
    #[error("not a lattice: {a} and {b} have no {missing}")]
    NotALattice {
        a: String,
        b: String,
        missing: &'static str,
    },
    #[error("orthocomplement is not an involution at {element}: ({element}')' = {image}")]
    OrthoNotInvolution { element: String, image: String },
    #[error("orthocomplement is not antitone: {a} <= {b} but {b}' is not <= {a}'")]
    OrthoNotAntitone { a: String, b: String },
    #[error("{complement} is not a complement of {element}: join is {join}")]
    ComplementNotUnique {
        element: String,
        complement: String,
        join: String,
    },
    #[error("orthomodular law fails for {a} <= {b}: {a} v ({a}' ^ {b}) = {got}")]
    OrthomodularLawViolated { a: String, b: String, got: String },
    #[error("block is not Boolean: distributivity fails on ({x}, {y}, {z})")]
    BlockNotBoolean { x: String, y: String, z: String },
    #[error("duplicate atom name {0:?}")]
    DuplicateAtomName(String),
    #[error("a Boolean algebra needs at least one atom")]
    EmptyAtoms,
    #[error("a horizontal sum needs at least 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("block {0} has fewer than 2 atoms and would collapse onto {{0, 1}}")]
    TrivialBlock(String),
    #[error("unknown element {0:?}")]
    UnknownElement(String),
}

pub type Result<T, E = LatticeError> = std::result::Result<T, E>;

/// Unvalidated lattice tables, indexed by element position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawOml {
    pub names: Vec<String>,
    pub leq: Vec<Vec<bool>>,
    pub ortho: Vec<usize>,
}

/// A maximal set of pairwise compatible elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub members: Vec<ElementId>,
    /// Minimal non-bottom members.
    pub atoms: Vec<ElementId>,
    pub is_boolean: bool,
}

impl Block {
    pub fn contains(&self, e: ElementId) -> bool {
        self.members.binary_search(&e).is_ok()
    }
}

/// One way of writing an element as a join of pairwise orthogonal atoms,
/// together with the blocks in which that decomposition lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomDecomposition {
    pub atoms: Vec<ElementId>,
    pub blocks: Vec<usize>,
}

/// Outcome of [`FiniteOml::horizontal_sum_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizontalSumCheck {
    pub is_horizontal_sum: bool,
    pub block_count: usize,
    /// First pair of blocks whose intersection is larger than `{0, 1}`.
    pub witness: Option<(usize, usize, Vec<ElementId>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteOml {
    names: Vec<String>,
    by_name: HashMap<String, ElementId>,
    leq: Vec<bool>,
    ortho: Vec<usize>,
    meet: Vec<usize>,
    join: Vec<usize>,
    compatible: Vec<bool>,
    bottom: usize,
    top: usize,
    atoms: Vec<ElementId>,
    blocks: Vec<Block>,
}

impl FiniteOml {
    /// Checks every orthomodular-lattice axiom on `raw` and derives the
    /// operation tables and blocks.
    pub fn validate(raw: &RawOml) -> Result<Self> {
        let n = raw.names.len();
        if n < 2 {
            return Err(LatticeError::Malformed(
                "need at least the two elements 0 and 1".into(),
            ));
        }
        if raw.leq.len() != n || raw.leq.iter().any(|row| row.len() != n) {
            return Err(LatticeError::Malformed(format!(
                "order table must be {n}x{n}"
            )));
        }
        if raw.ortho.len() != n {
            return Err(LatticeError::Malformed(format!(
                "orthocomplement map must have {n} entries"
            )));
        }
        if let Some(&bad) = raw.ortho.iter().find(|&&o| o >= n) {
            return Err(LatticeError::Malformed(format!(
                "orthocomplement index {bad} out of range"
            )));
        }
        let mut by_name = HashMap::with_capacity(n);
        for (i, name) in raw.names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(LatticeError::Malformed(format!("element {i} has an empty name")));
            }
            if by_name.insert(name.clone(), ElementId(i)).is_some() {
                return Err(LatticeError::DuplicateName(name.clone()));
            }
        }

        let leq: Vec<bool> = raw.leq.iter().flatten().copied().collect();
        let le = |a: usize, b: usize| leq[a * n + b];
        let name = |i: usize| raw.names[i].clone();

        for a in 0..n {
            if !le(a, a) {
                return Err(LatticeError::NotAPartialOrder(format!(
                    "{} <= {} does not hold",
                    name(a),
                    name(a)
                )));
            }
            for b in 0..n {
                if a != b && le(a, b) && le(b, a) {
                    return Err(LatticeError::NotAPartialOrder(format!(
                        "{} and {} are mutually below each other",
                        name(a),
                        name(b)
                    )));
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                if !le(a, b) {
                    continue;
                }
                for c in 0..n {
                    if le(b, c) && !le(a, c) {
                        return Err(LatticeError::NotAPartialOrder(format!(
                            "{} <= {} <= {} but not {} <= {}",
                            name(a),
                            name(b),
                            name(c),
                            name(a),
                            name(c)
                        )));
                    }
                }
            }
        }

        let bottom = (0..n)
            .find(|&a| (0..n).all(|b| le(a, b)))
            .ok_or(LatticeError::NotBounded("bottom"))?;
        let top = (0..n)
            .find(|&a| (0..n).all(|b| le(b, a)))
            .ok_or(LatticeError::NotBounded("top"))?;
        for (i, n) in raw.names.iter().enumerate() {
            if n == BOTTOM_NAME && i != bottom {
                return Err(LatticeError::ReservedName { name: n.clone(), role: "bottom" });
            }
            if n == TOP_NAME && i != top {
                return Err(LatticeError::ReservedName { name: n.clone(), role: "top" });
            }
        }
        if raw.names[bottom] != BOTTOM_NAME {
            return Err(LatticeError::Malformed(format!(
                "bottom element must be named {BOTTOM_NAME:?}, found {:?}",
                raw.names[bottom]
            )));
        }
        if raw.names[top] != TOP_NAME {
            return Err(LatticeError::Malformed(format!(
                "top element must be named {TOP_NAME:?}, found {:?}",
                raw.names[top]
            )));
        }

        let mut meet = vec![0; n * n];
        let mut join = vec![0; n * n];
        for a in 0..n {
            for b in a..n {
                let m = extremal_bound(n, |c| le(c, a) && le(c, b), |x, y| le(x, y)).ok_or_else(
                    || LatticeError::NotALattice { a: name(a), b: name(b), missing: "meet" },
                )?;
                let j = extremal_bound(n, |c| le(a, c) && le(b, c), |x, y| le(y, x)).ok_or_else(
                    || LatticeError::NotALattice { a: name(a), b: name(b), missing: "join" },
                )?;
                meet[a * n + b] = m;
                meet[b * n + a] = m;
                join[a * n + b] = j;
                join[b * n + a] = j;
            }
        }

        let ortho = &raw.ortho;
        for a in 0..n {
            if ortho[ortho[a]] != a {
                return Err(LatticeError::OrthoNotInvolution {
                    element: name(a),
                    image: name(ortho[ortho[a]]),
                });
            }
        }
        for a in 0..n {
            for b in 0..n {
                if le(a, b) && !le(ortho[b], ortho[a]) {
                    return Err(LatticeError::OrthoNotAntitone { a: name(a), b: name(b) });
                }
            }
        }
        for a in 0..n {
            let j = join[a * n + ortho[a]];
            if j != top {
                return Err(LatticeError::ComplementNotUnique {
                    element: name(a),
                    complement: name(ortho[a]),
                    join: name(j),
                });
            }
        }
        for a in 0..n {
            for b in 0..n {
                if le(a, b) {
                    let got = join[a * n + meet[ortho[a] * n + b]];
                    if got != b {
                        return Err(LatticeError::OrthomodularLawViolated {
                            a: name(a),
                            b: name(b),
                            got: name(got),
                        });
                    }
                }
            }
        }

        let atoms: Vec<ElementId> = (0..n)
            .filter(|&a| a != bottom && (0..n).all(|c| c == bottom || c == a || !le(c, a)))
            .map(ElementId)
            .collect();

        let mut compatible = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                let ab = meet[a * n + b];
                let a_nb = meet[a * n + ortho[b]];
                let na_b = meet[ortho[a] * n + b];
                compatible[a * n + b] = join[ab * n + a_nb] == a && join[ab * n + na_b] == b;
            }
        }

        let mut lattice = FiniteOml {
            names: raw.names.clone(),
            by_name,
            leq,
            ortho: raw.ortho.clone(),
            meet,
            join,
            compatible,
            bottom,
            top,
            atoms,
            blocks: Vec::new(),
        };
        lattice.blocks = lattice.enumerate_blocks()?;
        Ok(lattice)
    }

    /// The power-set algebra over `atom_names`, ordered by inclusion.
    ///
    /// Elements are listed by subset bitmask. Singletons carry the atom name,
    /// complements of singletons (three or more atoms) carry the atom name with
    /// a trailing prime, and other subsets are named by their atoms joined with
    /// `+`. With a single atom the algebra is just `{0, 1}`.
    pub fn boolean_algebra<S: AsRef<str>>(atom_names: &[S]) -> Result<Self> {
        if atom_names.is_empty() {
            return Err(LatticeError::EmptyAtoms);
        }
        let atoms: Vec<&str> = atom_names.iter().map(AsRef::as_ref).collect();
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].contains(a) {
                return Err(LatticeError::DuplicateAtomName(a.to_string()));
            }
            if *a == BOTTOM_NAME || *a == TOP_NAME {
                return Err(LatticeError::ReservedName {
                    name: a.to_string(),
                    role: if *a == BOTTOM_NAME { "bottom" } else { "top" },
                });
            }
        }
        let k = atoms.len();
        if k > 16 {
            return Err(LatticeError::Malformed(format!(
                "{k} atoms is beyond desk scale (at most 16)"
            )));
        }
        let n = 1usize << k;
        let full = n - 1;
        let names: Vec<String> = (0..n)
            .map(|mask| {
                let bits = mask.count_ones() as usize;
                if mask == 0 {
                    BOTTOM_NAME.to_string()
                } else if mask == full {
                    TOP_NAME.to_string()
                } else if bits == 1 {
                    atoms[mask.trailing_zeros() as usize].to_string()
                } else if bits == k - 1 {
                    let missing = (full & !mask).trailing_zeros() as usize;
                    format!("{}'", atoms[missing])
                } else {
                    (0..k)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| atoms[i])
                        .collect::<Vec<_>>()
                        .join("+")
                }
            })
            .collect();
        let leq = (0..n)
            .map(|a| (0..n).map(|b| a & !b == 0).collect())
            .collect();
        let ortho = (0..n).map(|a| full & !a).collect();
        Self::validate(&RawOml { names, leq, ortho })
    }

    /// Horizontal sum of Boolean algebras: block interiors are kept disjoint
    /// and glued at a shared bottom and top.
    pub fn horizontal_sum(blocks: &[FiniteOml]) -> Result<Self> {
        Self::horizontal_sum_embedded(blocks).map(|(sum, _)| sum)
    }

    /// As [`FiniteOml::horizontal_sum`], also returning for each input block the
    /// image of each of its elements in the sum.
    pub fn horizontal_sum_embedded(blocks: &[FiniteOml]) -> Result<(Self, Vec<Vec<ElementId>>)> {
        if blocks.len() < 2 {
            return Err(LatticeError::TooFewBlocks(blocks.len()));
        }
        for b in blocks {
            if let Some((x, y, z)) = b.distributivity_violation() {
                return Err(LatticeError::BlockNotBoolean {
                    x: b.name(x).into(),
                    y: b.name(y).into(),
                    z: b.name(z).into(),
                });
            }
            if b.atoms.len() < 2 {
                return Err(LatticeError::TrivialBlock(
                    b.names
                        .iter()
                        .filter(|n| *n != BOTTOM_NAME && *n != TOP_NAME)
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(","),
                ));
            }
        }
        let mut names = vec![BOTTOM_NAME.to_string()];
        let mut owner: Vec<Option<(usize, usize)>> = vec![None];
        let mut embedding = Vec::with_capacity(blocks.len());
        for (bi, b) in blocks.iter().enumerate() {
            let mut image = vec![ElementId(0); b.len()];
            for e in 0..b.len() {
                if e == b.bottom {
                    continue;
                }
                if e == b.top {
                    continue;
                }
                image[e] = ElementId(names.len());
                names.push(b.names[e].clone());
                owner.push(Some((bi, e)));
            }
            embedding.push(image);
        }
        let top = names.len();
        names.push(TOP_NAME.to_string());
        owner.push(None);
        for (bi, b) in blocks.iter().enumerate() {
            embedding[bi][b.bottom] = ElementId(0);
            embedding[bi][b.top] = ElementId(top);
        }
        let n = names.len();
        let leq = (0..n)
            .map(|x| {
                (0..n)
                    .map(|y| {
                        if x == 0 || y == top {
                            return true;
                        }
                        match (owner[x], owner[y]) {
                            (Some((bx, ex)), Some((by, ey))) => {
                                bx == by && blocks[bx].leq(ElementId(ex), ElementId(ey))
                            }
                            _ => false,
                        }
                    })
                    .collect()
            })
            .collect();
        let ortho = (0..n)
            .map(|x| match owner[x] {
                None if x == 0 => top,
                None => 0,
                Some((bi, e)) => embedding[bi][blocks[bi].ortho[e]].0,
            })
            .collect();
        let sum = Self::validate(&RawOml { names, leq, ortho })?;
        Ok((sum, embedding))
    }

    /// Copy of this lattice with interior elements renamed; `0` and `1` keep
    /// their names.
    pub fn renamed(&self, mut rename: impl FnMut(ElementId, &str) -> String) -> Result<Self> {
        let names = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if i == self.bottom || i == self.top {
                    n.clone()
                } else {
                    rename(ElementId(i), n)
                }
            })
            .collect();
        let mut raw = self.to_raw();
        raw.names = names;
        Self::validate(&raw)
    }

    pub fn to_raw(&self) -> RawOml {
        let n = self.len();
        RawOml {
            names: self.names.clone(),
            leq: (0..n)
                .map(|a| self.leq[a * n..(a + 1) * n].to_vec())
                .collect(),
            ortho: self.ortho.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementId> + '_ {
        (0..self.len()).map(ElementId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, e: ElementId) -> &str {
        &self.names[e.0]
    }

    pub fn element(&self, name: &str) -> Option<ElementId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ElementId> {
        self.element(name)
            .ok_or_else(|| LatticeError::UnknownElement(name.to_string()))
    }

    pub fn bottom(&self) -> ElementId {
        ElementId(self.bottom)
    }

    pub fn top(&self) -> ElementId {
        ElementId(self.top)
    }

    pub fn leq(&self, a: ElementId, b: ElementId) -> bool {
        self.leq[a.0 * self.len() + b.0]
    }

    pub fn meet(&self, a: ElementId, b: ElementId) -> ElementId {
        ElementId(self.meet[a.0 * self.len() + b.0])
    }

    pub fn join(&self, a: ElementId, b: ElementId) -> ElementId {
        ElementId(self.join[a.0 * self.len() + b.0])
    }

    pub fn ortho(&self, a: ElementId) -> ElementId {
        ElementId(self.ortho[a.0])
    }

    /// `a ⊥ b`, i.e. `a <= b'`.
    pub fn is_orthogonal(&self, a: ElementId, b: ElementId) -> bool {
        self.leq(a, self.ortho(b))
    }

    pub fn is_compatible(&self, a: ElementId, b: ElementId) -> bool {
        self.compatible[a.0 * self.len() + b.0]
    }

    pub fn atoms(&self) -> &[ElementId] {
        &self.atoms
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// A lattice with a single block is a Boolean algebra.
    pub fn is_boolean(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn blocks_containing(&self, e: ElementId) -> impl Iterator<Item = usize> + '_ {
        self.blocks
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.contains(e))
            .map(|(i, _)| i)
    }

    /// Every pair of distinct blocks must intersect exactly in `{0, 1}`; a
    /// lattice with a single block is not reported as a sum.
    pub fn horizontal_sum_check(&self) -> HorizontalSumCheck {
        let block_count = self.blocks.len();
        for i in 0..block_count {
            for j in i + 1..block_count {
                let shared: Vec<ElementId> = self.blocks[i]
                    .members
                    .iter()
                    .copied()
                    .filter(|&e| self.blocks[j].contains(e))
                    .collect();
                if shared.len() != 2 {
                    return HorizontalSumCheck {
                        is_horizontal_sum: false,
                        block_count,
                        witness: Some((i, j, shared)),
                    };
                }
            }
        }
        HorizontalSumCheck {
            is_horizontal_sum: block_count >= 2,
            block_count,
            witness: None,
        }
    }

    pub fn is_horizontal_sum(&self) -> bool {
        self.horizontal_sum_check().is_horizontal_sum
    }

    /// All ways of writing `a` as a join of block atoms, one per block that
    /// contains `a`, with identical atom sets merged.
    pub fn atom_decompositions(&self, a: ElementId) -> Vec<AtomDecomposition> {
        let mut out: Vec<AtomDecomposition> = Vec::new();
        for (bi, block) in self.blocks.iter().enumerate() {
            if !block.contains(a) {
                continue;
            }
            let atoms: Vec<ElementId> = block
                .atoms
                .iter()
                .copied()
                .filter(|&t| self.leq(t, a))
                .collect();
            match out.iter_mut().find(|d| d.atoms == atoms) {
                Some(existing) => existing.blocks.push(bi),
                None => out.push(AtomDecomposition { atoms, blocks: vec![bi] }),
            }
        }
        out
    }

    /// First triple (in index order) on which `x ∧ (y ∨ z) = (x ∧ y) ∨ (x ∧ z)`
    /// fails, searched over the whole lattice.
    pub fn distributivity_violation(&self) -> Option<(ElementId, ElementId, ElementId)> {
        let all: Vec<ElementId> = self.elements().collect();
        self.distributivity_violation_in(&all)
    }

    fn distributivity_violation_in(
        &self,
        members: &[ElementId],
    ) -> Option<(ElementId, ElementId, ElementId)> {
        for &x in members {
            for &y in members {
                for &z in members {
                    let lhs = self.meet(x, self.join(y, z));
                    let rhs = self.join(self.meet(x, y), self.meet(x, z));
                    if lhs != rhs {
                        return Some((x, y, z));
                    }
                }
            }
        }
        None
    }

    fn enumerate_blocks(&self) -> Result<Vec<Block>> {
        let n = self.len();
        let neighbours: Vec<BitSet> = (0..n)
            .map(|a| {
                let mut s = BitSet::new(n);
                for b in 0..n {
                    if a != b && self.compatible[a * n + b] {
                        s.insert(b);
                    }
                }
                s
            })
            .collect();
        let mut cliques = Vec::new();
        bron_kerbosch(
            &neighbours,
            &mut Vec::new(),
            BitSet::full(n),
            BitSet::new(n),
            &mut cliques,
        );
        cliques.sort();

        let mut blocks = Vec::with_capacity(cliques.len());
        for members in cliques {
            let members: Vec<ElementId> = members.into_iter().map(ElementId).collect();
            let inside = |e: ElementId| members.binary_search(&e).is_ok();
            let closed = inside(self.bottom())
                && inside(self.top())
                && members.iter().all(|&a| {
                    inside(self.ortho(a))
                        && members
                            .iter()
                            .all(|&b| inside(self.meet(a, b)) && inside(self.join(a, b)))
                });
            if !closed {
                return Err(LatticeError::Malformed(format!(
                    "maximal compatible set {{{}}} is not a sublattice",
                    members.iter().map(|&e| self.name(e)).collect::<Vec<_>>().join(", ")
                )));
            }
            if let Some((x, y, z)) = self.distributivity_violation_in(&members) {
                return Err(LatticeError::BlockNotBoolean {
                    x: self.name(x).into(),
                    y: self.name(y).into(),
                    z: self.name(z).into(),
                });
            }
            let atoms = members
                .iter()
                .copied()
                .filter(|&a| {
                    a != self.bottom()
                        && members
                            .iter()
                            .all(|&c| c == self.bottom() || c == a || !self.leq(c, a))
                })
                .collect();
            blocks.push(Block { members, atoms, is_boolean: true });
        }
        Ok(blocks)
    }
}

/// The unique candidate that every other candidate lies `below`, if any.
fn extremal_bound(
    n: usize,
    is_candidate: impl Fn(usize) -> bool,
    below: impl Fn(usize, usize) -> bool,
) -> Option<usize> {
    let candidates: Vec<usize> = (0..n).filter(|&c| is_candidate(c)).collect();
    let best = candidates
        .iter()
        .copied()
        .find(|&m| candidates.iter().all(|&c| below(c, m)))?;
    Some(best)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    fn new(len: usize) -> Self {
        BitSet { words: vec![0; len.div_ceil(64)], len }
    }

    fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn intersect(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    fn union(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
            len: self.len,
        }
    }

    fn count_common(&self, other: &BitSet) -> u32 {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}

/// Bron–Kerbosch with Tomita pivoting; emits each maximal clique sorted.
fn bron_kerbosch(
    neighbours: &[BitSet],
    current: &mut Vec<usize>,
    candidates: BitSet,
    excluded: BitSet,
    out: &mut Vec<Vec<usize>>,
) {
    if candidates.is_empty() {
        if excluded.is_empty() {
            let mut clique = current.clone();
            clique.sort_unstable();
            out.push(clique);
        }
        return;
    }
    let pivot = candidates
        .union(&excluded)
        .iter()
        .max_by_key(|&u| (candidates.count_common(&neighbours[u]), std::cmp::Reverse(u)))
        .expect("non-empty candidate set");
    let mut candidates = candidates;
    let mut excluded = excluded;
    let branch: Vec<usize> = candidates
        .iter()
        .filter(|&v| !neighbours[pivot].contains(v))
        .collect();
    for v in branch {
        current.push(v);
        bron_kerbosch(
            neighbours,
            current,
            candidates.intersect(&neighbours[v]),
            excluded.intersect(&neighbours[v]),
            out,
        );
        current.pop();
        candidates.remove(v);
        excluded.insert(v);
    }
}
