use std::collections::BTreeSet;

use clausemask::cnf::{variable_order, OrderScheme};
use clausemask::maskset::{build_clause_mask, build_clause_mask_with, clause_masks, table_rows};
use clausemask::oracle::{all_models, brute_force};
use clausemask::{bench, decide, extract_models, Clause, Decision, Formula, Literal, Mode, SolveOptions, VarId};
use proptest::prelude::*;

/// Clause with distinct variables drawn from `0..v`.
fn clause_strategy(v: usize) -> impl Strategy<Value = Clause> {
    prop::collection::vec(prop::option::of(any::<bool>()), v).prop_map(|signs| {
        signs
            .into_iter()
            .enumerate()
            .filter_map(|(j, s)| s.map(|negated| Literal { var: VarId(j as u32), negated }))
            .collect()
    })
}

fn shuffled_clause(v: usize) -> impl Strategy<Value = (usize, Clause)> {
    clause_strategy(v).prop_flat_map(move |c| (Just(v), Just(c.literals).prop_shuffle().prop_map(Clause::new)))
}

fn falsifies(clause: &Clause, k: u64) -> bool {
    clause.literals.iter().all(|l| (k >> l.var.0 & 1 == 1) == l.negated)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mask_bit_set_iff_assignment_falsifies((v, clause) in (0usize..=12).prop_flat_map(shuffled_clause)) {
        let mask = build_clause_mask(&clause, v, Mode::BlockOps).unwrap();
        prop_assert_eq!(mask.width(), 1 << v);
        for k in 0..1u64 << v {
            prop_assert_eq!(mask.get(k as usize), falsifies(&clause, k), "k = {}", k);
        }
        prop_assert_eq!(mask.count_ones(), 1u64 << (v - clause.len()));
    }

    #[test]
    fn modes_agree_bit_for_bit((v, clause) in (0usize..=12).prop_flat_map(shuffled_clause)) {
        let faithful = build_clause_mask(&clause, v, Mode::BigIntFaithful).unwrap();
        let block = build_clause_mask(&clause, v, Mode::BlockOps).unwrap();
        prop_assert_eq!(&faithful, &block);
        let skipping = SolveOptions { skip_absent_runs: true, ..Default::default() };
        prop_assert_eq!(build_clause_mask_with(&clause, v, &skipping).unwrap(), block);
    }
}

fn formula_strategy() -> impl Strategy<Value = Formula> {
    (1usize..=8)
        .prop_flat_map(|v| prop::collection::vec(clause_strategy(v), 0..20).prop_map(move |cs| Formula::new(v, cs)))
}

fn with_permutations() -> impl Strategy<Value = (Formula, Vec<VarId>, Vec<usize>)> {
    formula_strategy().prop_flat_map(|f| {
        let vars: Vec<VarId> = (0..f.var_count as u32).map(VarId).collect();
        let clauses: Vec<usize> = (0..f.clauses.len()).collect();
        (Just(f), Just(vars).prop_shuffle(), Just(clauses).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn decision_ignores_variable_and_clause_order((f, vars, clauses) in with_permutations()) {
        let base = decide(&f, &SolveOptions::default()).unwrap().decision;
        let mut g = variable_order(&f, &OrderScheme::Explicit(vars)).unwrap();
        g.clauses = clauses.iter().map(|&i| g.clauses[i].clone()).collect();
        prop_assert_eq!(decide(&g, &SolveOptions::default()).unwrap().decision, base);
        prop_assert_eq!(brute_force(&f).unwrap().decision, base);
    }

    #[test]
    fn halting_clause_is_the_first_full_prefix(f in formula_strategy()) {
        let report = decide(&f, &SolveOptions::default()).unwrap();
        let first_unsat_prefix = (1..=f.clauses.len()).find(|&n| {
            let prefix = Formula::new(f.var_count, f.clauses[..n].to_vec());
            !brute_force(&prefix).unwrap().decision.is_sat()
        });
        prop_assert_eq!(report.halted_at_clause, first_unsat_prefix.map(|n| n - 1));
        let parallel = decide(&f, &SolveOptions { parallel: true, ..Default::default() }).unwrap();
        prop_assert_eq!(parallel.halted_at_clause, report.halted_at_clause);
        prop_assert_eq!(parallel.decision, report.decision);
    }

    #[test]
    fn extracted_models_are_exactly_the_satisfying_set(f in formula_strategy()) {
        let report = decide(&f, &SolveOptions::default().keep_field()).unwrap();
        let expected = all_models(&f, 12).unwrap();
        match report.decision {
            Decision::Satisfiable => prop_assert_eq!(extract_models(&report, &f, None).unwrap(), expected),
            Decision::Unsatisfiable => prop_assert!(expected.is_empty()),
        }
    }

    #[test]
    fn bit_ops_cover_every_accumulated_clause(f in formula_strategy()) {
        let report = decide(&f, &SolveOptions::default()).unwrap();
        let processed = report.halted_at_clause.map_or(f.clauses.len(), |h| h + 1) as u64;
        prop_assert!(report.counters.bit_ops >= processed << f.var_count);
        prop_assert_eq!(report.counters.masks_built, processed);
    }
}

#[test]
fn truth_rows_and_masks_are_complements() {
    for v in 1..=5 {
        let rows = table_rows(v).unwrap();
        assert_eq!(rows.len(), 3usize.pow(v as u32) - 1);
        let distinct: BTreeSet<u64> = rows.iter().map(|r| r.mask_value).collect();
        assert_eq!(distinct.len(), rows.len());
        let all_ones = (1u64 << (1 << v)) - 1;
        for row in &rows {
            // Column c is assignment index 2^v - 1 - c, so reading the row
            // left to right gives the bits from most significant down.
            let truth = row.truth_row.iter().fold(0u64, |acc, &b| acc << 1 | b as u64);
            assert_eq!(truth + row.mask_value, all_ones, "{}", row.label);
            assert_eq!(truth & row.mask_value, 0);
        }
    }
}

#[test]
fn all_three_clause_formulas_match_brute_force() {
    let rows = table_rows(3).unwrap();
    let masks: Vec<u64> = rows.iter().map(|r| r.mask_value).collect();
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate().skip(i + 1) {
            let f = Formula::new(3, vec![a.clause.clone(), b.clause.clone()]);
            let expect = brute_force(&f).unwrap().decision;
            assert_eq!(decide(&f, &SolveOptions::default()).unwrap().decision, expect);
            assert_eq!((masks[i] | masks[j] == 255), expect == Decision::Unsatisfiable);
        }
    }
}

#[test]
fn random_satisfiable_instances_yield_valid_models() {
    let corpus = bench::random_corpus(99, 300, 6);
    let mut checked = 0;
    for f in corpus.iter().filter(|f| f.var_count == 6) {
        let report = decide(f, &SolveOptions::default().keep_field()).unwrap();
        if report.decision == Decision::Satisfiable {
            for model in extract_models(&report, f, None).unwrap() {
                assert!(f.clauses.iter().all(|c| c.literals.iter().any(|l| model.value(l.var) != l.negated)));
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn clause_mask_listing_keeps_indices() {
    let f = Formula::new(2, vec![Clause::new(vec![Literal::pos(0)]), Clause::new(vec![Literal::neg(1)])]);
    let masks = clause_masks(&f, &SolveOptions::default()).unwrap();
    assert_eq!(
        masks.iter().map(|m| (m.clause_index, m.mask.words()[0])).collect::<Vec<_>>(),
        vec![(0, 0b0101), (1, 0b1100)]
    );
}
