use std::collections::BTreeMap;

use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omlprob::causality::{fit_smap_from_experiments, granger_causes, Cell, ExperimentCounts, ExperimentOrder, ProcessLattice};
use omlprob::generate::{random_horizontal_sum, random_observable, random_smap, RandomSpec};
use omlprob::io::{parse_document, LatticeDocument, LatticeRef, SMapDocument, WorkspaceDocument};
use omlprob::lattice::{FiniteOml, RawOml};
use omlprob::observable::{
    check_oplus_properties, conditional_expectation, joint_sum_expectation, oplus, Observable,
};
use omlprob::rational::{integer, Rational};
use omlprob::state::{Classification, SMap};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn boolean(k: usize) -> FiniteOml {
    let names: Vec<String> = (0..k).map(|i| format!("u{i}")).collect();
    FiniteOml::boolean_algebra(&names).unwrap()
}

/// L2 is the one non-horizontal-sum lattice at hand; mix it in.
fn some_lattice(seed: u64) -> FiniteOml {
    match seed % 5 {
        0 => omlprob::io::load_lattice("l2.json", None).unwrap().oml().clone(),
        1 => boolean(1 + (seed / 5 % 4) as usize),
        _ => random_horizontal_sum(&mut rng(seed), &RandomSpec::default()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_identities(seed in any::<u64>()) {
        let l = some_lattice(seed);
        for a in l.elements() {
            prop_assert_eq!(l.meet(a, l.ortho(a)), l.bottom());
            for b in l.elements() {
                if l.is_orthogonal(a, b) {
                    prop_assert!(l.is_compatible(a, b));
                }
                prop_assert_eq!(l.ortho(l.join(a, b)), l.meet(l.ortho(a), l.ortho(b)));
                let lower = l.join(l.meet(a, b), l.meet(a, l.ortho(b)));
                prop_assert!(l.leq(lower, a));
            }
        }
    }

    #[test]
    fn blocks_cover_and_decide_distributivity(seed in any::<u64>()) {
        let l = some_lattice(seed);
        for e in l.elements() {
            prop_assert!(l.blocks_containing(e).next().is_some());
        }
        prop_assert_eq!(l.distributivity_violation().is_none(), l.blocks().len() == 1);
        if l.blocks().len() == 1 {
            prop_assert_eq!(l.blocks()[0].members.len(), l.len());
        }
    }

    #[test]
    fn validation_is_idempotent(seed in any::<u64>()) {
        let l = some_lattice(seed);
        let again = FiniteOml::validate(&l.to_raw()).unwrap();
        prop_assert_eq!(&again, &l);
        let RawOml { names, .. } = l.to_raw();
        prop_assert_eq!(names.len(), l.len());
    }

    #[test]
    fn horizontal_sum_recovers_its_blocks(sizes in prop::collection::vec(2usize..=4, 2..=4)) {
        let parts: Vec<FiniteOml> = sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let names: Vec<String> = (0..k).map(|j| format!("b{i}x{j}")).collect();
                FiniteOml::boolean_algebra(&names).unwrap()
            })
            .collect();
        let sum = FiniteOml::horizontal_sum(&parts).unwrap();
        prop_assert!(sum.is_horizontal_sum());
        prop_assert_eq!(sum.len(), 2 + sizes.iter().map(|k| (1usize << k) - 2).sum::<usize>());
        let mut got: Vec<usize> = sum.blocks().iter().map(|b| b.atoms.len()).collect();
        let mut want = sizes.clone();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
        for b in sum.blocks() {
            prop_assert_eq!(b.members.len(), 1usize << b.atoms.len());
        }
    }

    #[test]
    fn smap_identities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = RandomSpec::default();
        let l = random_horizontal_sum(&mut r, &spec);
        let p = random_smap(&mut r, &l, &spec);
        prop_assert!(SMap::validate(&l, p.table()).is_ok());
        prop_assert!(p.check_properties().all_passed());
        let top = l.top();
        for a in l.elements() {
            prop_assert_eq!(p.get(a, top), p.mass(a));
            prop_assert_eq!(p.get(top, a), p.mass(a));
        }
        let f = p.conditional(&BTreeMap::new()).unwrap();
        let back = f.to_smap().unwrap();
        for b in l.elements().filter(|&b| !p.mass(b).is_zero()) {
            for a in l.elements() {
                prop_assert_eq!(back.get(a, b), p.get(a, b));
                // p4: f(a|1) = f(a|b) iff a is independent of b
                let same = f.get(a, top) == f.get(a, b);
                prop_assert_eq!(same, p.is_independent(a, b).independent);
            }
        }
        for block in l.blocks() {
            for &a in &block.members {
                for &b in &block.members {
                    prop_assert_eq!(p.get(a, b), p.mass(l.meet(a, b)));
                }
            }
        }
    }

    #[test]
    fn boolean_algebras_only_carry_symmetric_smaps(k in 1usize..=4, seed in any::<u64>()) {
        let l = boolean(k);
        let p = random_smap(&mut rng(seed), &l, &RandomSpec::default());
        prop_assert_eq!(p.classify().classification, Classification::Symmetric);
    }

    #[test]
    fn expectation_identities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = RandomSpec::default();
        let l = random_horizontal_sum(&mut r, &spec);
        let p = random_smap(&mut r, &l, &spec);
        let x = random_observable(&mut r, &l);
        let y = random_observable(&mut r, &l);
        let ex = x.expectation(&p);
        let ey = y.expectation(&p);
        prop_assert_eq!(joint_sum_expectation(&p, &x, &y), &ex + &ey);

        let b = y.range();
        let z = conditional_expectation(&p, &x, &b).unwrap();
        if z.zero_mass_atoms.is_empty() {
            prop_assert_eq!(z.observable.expectation(&p), ex.clone());
            let s = oplus(&p, &x, &y).unwrap();
            prop_assert_eq!(s.observable.expectation(&p), &ex + &ey);
        }
        prop_assert!(z.observable.range().is_subset_of(&b));
        let zz = conditional_expectation(&p, &z.observable, &b).unwrap();
        prop_assert_eq!(zz.observable.support(), z.observable.support());
        let s = oplus(&p, &x, &y).unwrap();
        prop_assert!(s.observable.range().is_subset_of(&y.range()));

        let c = integer(r.gen_range(-3..=3));
        let constant = Observable::constant(&l, c.clone()).unwrap();
        let shifted = oplus(&p, &x, &constant).unwrap();
        prop_assert_eq!(shifted.observable.expectation(&p), &ex + &c);

        let report = check_oplus_properties(&p, &x, &y, None).unwrap();
        for check in &report.checks {
            if check.name == "e4" || check.name == "d1" || check.name == "e2" {
                prop_assert!(check.passed, "{} failed: {:?}", check.name, check.witness);
            }
        }
    }

    #[test]
    fn generated_documents_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = RandomSpec::default();
        let l = random_horizontal_sum(&mut r, &spec);
        let p = random_smap(&mut r, &l, &spec);
        let lattice = LatticeRef::Inline(Box::new(LatticeDocument::from_oml(&l)));
        let doc = WorkspaceDocument::SMap(SMapDocument::from_smap(&p, Some(lattice)));
        let text = doc.to_text();
        let parsed = parse_document(&text, "generated").unwrap();
        prop_assert_eq!(&parsed, &doc);
        prop_assert_eq!(parsed.to_text(), text);
        if let WorkspaceDocument::SMap(d) = parsed {
            let LatticeRef::Inline(ld) = d.lattice.clone().unwrap() else { unreachable!() };
            let loaded = ld.build().unwrap();
            prop_assert_eq!(loaded.oml(), &l);
            prop_assert_eq!(d.build(loaded.oml()).unwrap().table(), p.table());
        }
    }

    #[test]
    fn granger_on_symmetric_experiments_detects_exactly_non_products(
        counts in prop::collection::vec(prop::collection::vec(0u64..6, 2..=3), 2..=3)
    ) {
        let cols = counts[0].len();
        let counts: Vec<Vec<u64>> = counts.into_iter().map(|mut r| { r.resize(cols, 1); r }).collect();
        let total: u64 = counts.iter().flatten().sum();
        prop_assume!(total > 0);
        let rows_sum: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let cols_sum: Vec<u64> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let is_product = (0..counts.len())
            .all(|i| (0..cols).all(|j| counts[i][j] * total == rows_sum[i] * cols_sum[j]));

        let base = |k: usize, tag: &str| -> Vec<String> { (0..k).map(|i| format!("{tag}{i}")).collect() };
        let xi = base(counts.len(), "x");
        let eta = base(cols, "y");
        // Two cells with different atom counts cannot share one base algebra,
        // so pad the smaller side with never-observed outcomes.
        let k = counts.len().max(cols);
        let xi_names = base(k, "x");
        let eta_names = base(k, "y");
        let pl = ProcessLattice::from_cells(
            boolean(k),
            vec![
                (Cell::new("X", "1"), Some(xi_names)),
                (Cell::new("Y", "0"), Some(eta_names)),
            ],
        ).unwrap();
        let mut e1 = BTreeMap::new();
        let mut e2 = BTreeMap::new();
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                e1.insert((xi[i].clone(), eta[j].clone()), c);
                e2.insert((eta[j].clone(), xi[i].clone()), c);
            }
        }
        let e1 = ExperimentCounts { order: ExperimentOrder::XiThenEta, counts: e1 };
        let e2 = ExperimentCounts { order: ExperimentOrder::EtaThenXi, counts: e2 };
        let fitted = fit_smap_from_experiments(&pl, &e1, &e2, &Rational::zero()).unwrap();
        let p = &fitted.smap;
        let l = pl.lattice();
        for &a in l.atoms() {
            prop_assert_eq!(p.get(a, l.top()), p.mass(a));
            prop_assert_eq!(p.get(l.top(), a), p.mass(a));
        }
        let x = Cell::new("X", "1");
        let y = Cell::new("Y", "0");
        let forward = granger_causes(&pl, p, &x, &y).unwrap();
        let backward = granger_causes(&pl, p, &y, &x).unwrap();
        prop_assert_eq!(!forward.causes && !backward.causes, is_product);
        prop_assert_eq!(forward.causes, !forward.witnesses.is_empty());
    }

    #[test]
    fn granger_ignores_atom_names(c in prop::collection::vec(1u64..20, 8)) {
        let verdicts = |names: [&str; 4]| {
            let pl = ProcessLattice::from_cells(
                boolean(2),
                vec![
                    (Cell::new("X", "1"), Some(vec![names[0].into(), names[1].into()])),
                    (Cell::new("Y", "0"), Some(vec![names[2].into(), names[3].into()])),
                ],
            ).unwrap();
            let pair = |f: &str, s: &str, n: u64| ((f.to_string(), s.to_string()), n);
            let e1 = ExperimentCounts {
                order: ExperimentOrder::XiThenEta,
                counts: [pair(names[0], names[2], c[0]), pair(names[0], names[3], c[1]),
                         pair(names[1], names[2], c[2]), pair(names[1], names[3], c[3])].into_iter().collect(),
            };
            // Same marginals as e1, different cross terms.
            let e2 = ExperimentCounts {
                order: ExperimentOrder::EtaThenXi,
                counts: [pair(names[2], names[0], c[0] + c[2]), pair(names[2], names[1], 0),
                         pair(names[3], names[0], 0), pair(names[3], names[1], c[1] + c[3])].into_iter().collect(),
            };
            let tol = Rational::new(1.into(), 1.into());
            let fitted = fit_smap_from_experiments(&pl, &e1, &e2, &tol);
            fitted.map(|f| {
                let x = Cell::new("X", "1");
                let y = Cell::new("Y", "0");
                [granger_causes(&pl, &f.smap, &x, &y).unwrap(), granger_causes(&pl, &f.smap, &y, &x).unwrap()]
                    .map(|v| (v.causes, v.witnesses.into_iter().map(|w| (w.conditional, w.unconditional)).collect::<Vec<_>>()))
            }).map_err(|e| e.to_string())
        };
        let first = verdicts(["a", "a'", "b", "b'"]);
        let second = verdicts(["p", "q", "r", "s"]);
        match (first, second) {
            (Ok(f), Ok(s)) => prop_assert_eq!(f, s),
            (Err(_), Err(_)) => {}
            (f, s) => prop_assert!(false, "verdicts differ: {:?} vs {:?}", f, s),
        }
    }
}
