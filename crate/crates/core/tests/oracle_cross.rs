use clausemask::bench::random_corpus;
use clausemask::oracle::{brute_force, dpll, evaluate};

#[test]
fn dpll_agrees_with_brute_force() {
    let corpus = random_corpus(2024, 10_000, 12);
    let mut sat = 0;
    for f in &corpus {
        let brute = brute_force(f).unwrap();
        let search = dpll(f);
        assert_eq!(brute.decision, search.decision, "{f}");
        for witness in [&brute.witness, &search.witness].into_iter().flatten() {
            assert!(evaluate(f, witness).unwrap());
        }
        sat += brute.decision.is_sat() as usize;
    }
    assert!(sat > 1000 && sat < 9000, "{sat} satisfiable");
}
