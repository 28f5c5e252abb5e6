//! Seeded random instances: horizontal sums, s-maps on them, observables.
//!
//! S-maps are built per ordered pair of blocks: the cross table between two
//! blocks is a convex mix of the product coupling and a north-west-corner
//! coupling of the two block marginals, so both margins hold by construction
//! and the two orders of a pair are drawn independently.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::lattice::{ElementId, FiniteOml};
use crate::observable::Observable;
use crate::rational::{integer, rational, Rational};
use crate::state::{SMap, State};

#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub blocks: RangeInclusive<usize>,
    pub atoms: RangeInclusive<usize>,
    /// Block marginals are drawn over a denominator up to this bound.
    pub max_denominator: i64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { blocks: 2..=4, atoms: 2..=4, max_denominator: 10 }
    }
}

/// Blocks are named by letter, atoms `a1`, `a2`, ...
pub fn random_horizontal_sum<R: Rng>(rng: &mut R, spec: &RandomSpec) -> FiniteOml {
    let blocks: Vec<FiniteOml> = (0..rng.gen_range(spec.blocks.clone()))
        .map(|i| {
            let letter = (b'a' + i as u8) as char;
            let names: Vec<String> = (1..=rng.gen_range(spec.atoms.clone()))
                .map(|j| format!("{letter}{j}"))
                .collect();
            FiniteOml::boolean_algebra(&names).expect("generated block names are distinct")
        })
        .collect();
    FiniteOml::horizontal_sum(&blocks).expect("generated blocks form a horizontal sum")
}

/// Probability vector of length `k` over a random denominator; zeros occur.
fn random_weights<R: Rng>(rng: &mut R, k: usize, max_denominator: i64) -> Vec<Rational> {
    let d = rng.gen_range(1..=max_denominator.max(1));
    let mut cuts: Vec<i64> = (0..k - 1).map(|_| rng.gen_range(0..=d)).collect();
    cuts.push(0);
    cuts.push(d);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| rational(w[1] - w[0], d)).collect()
}

fn north_west_corner(rows: &[Rational], cols: &[Rational]) -> Vec<Vec<Rational>> {
    let mut left_r = rows.to_vec();
    let mut left_c = cols.to_vec();
    let mut t = vec![vec![Rational::zero(); cols.len()]; rows.len()];
    let (mut i, mut j) = (0, 0);
    while i < rows.len() && j < cols.len() {
        let v = left_r[i].clone().min(left_c[j].clone());
        left_r[i] -= &v;
        left_c[j] -= &v;
        t[i][j] = v;
        if left_r[i].is_zero() {
            i += 1;
        } else {
            j += 1;
        }
    }
    t
}

/// Coupling of `rows` and `cols` mixing the product table with a
/// north-west-corner table taken under random row and column orders.
fn random_coupling<R: Rng>(rng: &mut R, rows: &[Rational], cols: &[Rational]) -> Vec<Vec<Rational>> {
    let mut rp: Vec<usize> = (0..rows.len()).collect();
    let mut cp: Vec<usize> = (0..cols.len()).collect();
    rp.shuffle(rng);
    cp.shuffle(rng);
    let permuted_rows: Vec<Rational> = rp.iter().map(|&i| rows[i].clone()).collect();
    let permuted_cols: Vec<Rational> = cp.iter().map(|&j| cols[j].clone()).collect();
    let nw = north_west_corner(&permuted_rows, &permuted_cols);
    let lambda = rational(rng.gen_range(0..=4), 4);
    let mut t = vec![vec![Rational::zero(); cols.len()]; rows.len()];
    for (pi, &i) in rp.iter().enumerate() {
        for (pj, &j) in cp.iter().enumerate() {
            t[i][j] = &lambda * &rows[i] * &cols[j] + (Rational::one() - &lambda) * &nw[pi][pj];
        }
    }
    t
}

/// Random s-map on a lattice whose blocks meet only in 0 and 1.
pub fn random_smap<'a, R: Rng>(rng: &mut R, lattice: &'a FiniteOml, spec: &RandomSpec) -> SMap<'a> {
    let blocks: Vec<Vec<ElementId>> = lattice.blocks().iter().map(|b| b.atoms.clone()).collect();
    let marginals: Vec<Vec<Rational>> = blocks
        .iter()
        .map(|atoms| random_weights(rng, atoms.len(), spec.max_denominator))
        .collect();
    let mut weights = BTreeMap::new();
    for (atoms, m) in blocks.iter().zip(&marginals) {
        for (&a, w) in atoms.iter().zip(m) {
            weights.insert(a, w.clone());
        }
    }
    let mut table = BTreeMap::new();
    for (i, row_atoms) in blocks.iter().enumerate() {
        for (j, col_atoms) in blocks.iter().enumerate() {
            if i == j {
                continue;
            }
            let t = random_coupling(rng, &marginals[i], &marginals[j]);
            for (r, &x) in row_atoms.iter().enumerate() {
                for (c, &y) in col_atoms.iter().enumerate() {
                    table.insert((x, y), t[r][c].clone());
                }
            }
        }
    }
    let marginal = State::from_atom_weights(lattice, &weights).expect("block weights sum to 1");
    SMap::from_atom_table(lattice, &table, &marginal).expect("couplings respect both margins")
}

/// Observable supported in one random block: a random grouping of its atoms,
/// each group given a distinct small value (integers and halves).
pub fn random_observable<'a, R: Rng>(rng: &mut R, lattice: &'a FiniteOml) -> Observable<'a> {
    let block = &lattice.blocks()[rng.gen_range(0..lattice.blocks().len())];
    let groups = rng.gen_range(1..=block.atoms.len());
    let mut members: Vec<Vec<ElementId>> = vec![Vec::new(); groups];
    let mut atoms = block.atoms.clone();
    atoms.shuffle(rng);
    for (k, a) in atoms.into_iter().enumerate() {
        let g = if k < groups { k } else { rng.gen_range(0..groups) };
        members[g].push(a);
    }
    let mut values: Vec<Rational> = Vec::new();
    while values.len() < groups {
        let v = rational(rng.gen_range(-6..=10), if rng.gen_bool(0.5) { 1 } else { 2 });
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let support = members
        .into_iter()
        .zip(values)
        .map(|(g, v)| {
            let e = g.into_iter().fold(lattice.bottom(), |acc, a| lattice.join(acc, a));
            (v, e)
        })
        .collect();
    Observable::validate(lattice, support).expect("grouped atoms are orthogonal and exhaustive")
}

/// Independent samples uniform on `{-k/4, ..., k/4}`.
pub fn noise_series<R: Rng>(rng: &mut R, len: usize, k: i64) -> Vec<Rational> {
    (0..len).map(|_| rational(rng.gen_range(-k..=k), 4)).collect()
}

/// Integer series drawn from `0..=bound`.
pub fn integer_series<R: Rng>(rng: &mut R, len: usize, bound: i64) -> Vec<Rational> {
    (0..len).map(|_| integer(rng.gen_range(0..=bound))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_instances_validate() {
        let spec = RandomSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let l = random_horizontal_sum(&mut rng, &spec);
            assert!(l.is_horizontal_sum());
            assert!((2..=4).contains(&l.blocks().len()));
            let p = random_smap(&mut rng, &l, &spec);
            assert!(SMap::validate(&l, p.table()).is_ok());
            let x = random_observable(&mut rng, &l);
            assert!(x.support().len() <= 4);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = RandomSpec::default();
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let l1 = random_horizontal_sum(&mut r1, &spec);
        let l2 = random_horizontal_sum(&mut r2, &spec);
        assert_eq!(l1, l2);
        assert_eq!(random_smap(&mut r1, &l1, &spec).table(), random_smap(&mut r2, &l2, &spec).table());
    }

    #[test]
    fn north_west_corner_keeps_margins() {
        let rows = vec![rational(1, 2), rational(1, 3), rational(1, 6)];
        let cols = vec![rational(1, 4), rational(3, 4)];
        let t = north_west_corner(&rows, &cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(t[i].iter().sum::<Rational>(), *r);
        }
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(t.iter().map(|r| &r[j]).sum::<Rational>(), *c);
        }
    }
}
