//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use clausemask::bench::{self, fit_report, run_scaling, RunOutcome, ScalingConfig, ScalingRecord};
use clausemask::cli;
use clausemask::cnf::{parse_dimacs, write_dimacs, CnfError};
use clausemask::maskset::{build_clause_mask, table_formula, table_rows};
use clausemask::oracle::{all_models, brute_force, dpll, evaluate};
use clausemask::{decide, extract_models, Clause, Decision, Formula, Literal, Mode, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Check + 'a>);

const TABLE2_VALUES: [u64; 26] =
    [15, 240, 51, 204, 85, 170, 3, 12, 48, 192, 5, 10, 80, 160, 17, 34, 68, 136, 1, 2, 4, 8, 16, 32, 64, 128];

const CORPUS_SEED: u64 = 0x5eed_0005;
const CORPUS_SIZE: usize = 10_000;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus() -> Vec<Formula> {
    bench::random_corpus(CORPUS_SEED, CORPUS_SIZE, 10)
}

/// Clause over the C,B,A processing order from letter literals like "~A".
fn abc_clause(lits: &[&str]) -> Clause {
    let f = table_formula(3).unwrap();
    lits.iter()
        .map(|s| {
            let (negated, name) = match s.strip_prefix('~') {
                Some(rest) => (true, rest),
                None => (false, *s),
            };
            Literal { var: f.var_by_name(name).unwrap(), negated }
        })
        .collect()
}

fn table_section(text: &str, title: &str) -> Vec<Vec<String>> {
    let start = text.find(title).expect("table title present");
    text[start..]
        .lines()
        .skip(3)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn criterion_1() -> Check {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(["clausemask", "masks", "--v", "3"], &mut std::io::empty(), &mut out, &mut err);
    ensure(code == cli::EXIT_OK, || format!("masks exited {code}"))?;
    let text = String::from_utf8(out).unwrap();
    let t1 = table_section(&text, "Table 1.");
    let t2 = table_section(&text, "Table 2.");
    ensure(t1.len() == 26 && t2.len() == 26, || format!("row counts {} / {}", t1.len(), t2.len()))?;
    for (i, (r1, r2)) in t1.iter().zip(&t2).enumerate() {
        ensure(r1[0] == r2[0], || format!("row {i} labels differ"))?;
        let bits: Vec<u64> = r2[1..9].iter().map(|b| b.parse().unwrap()).collect();
        let value: u64 = r2[9].parse().unwrap();
        ensure(value == TABLE2_VALUES[i], || format!("row {i} ({}) value {value} != {}", r2[0], TABLE2_VALUES[i]))?;
        let from_bits = bits.iter().fold(0, |acc, b| acc << 1 | b);
        ensure(from_bits == value, || format!("row {i} bits do not spell {value}"))?;
        for (col, (a, b)) in r1[1..9].iter().zip(&r2[1..9]).enumerate() {
            ensure(a != b, || format!("row {i} column {col} is not complemented"))?;
        }
    }
    let library: Vec<u64> = table_rows(3).map_err(|e| e.to_string())?.iter().map(|r| r.mask_value).collect();
    ensure(library == TABLE2_VALUES, || "table_rows disagrees with rendered table".into())?;
    Ok("26 rows exact, Table 1 rows complement Table 2".into())
}

fn criterion_2() -> Check {
    let cases: [(&[&str], u64); 5] =
        [(&["A", "B", "C"], 1), (&["A", "B", "~C"], 2), (&["A", "B"], 3), (&["~A", "B", "C"], 16), (&["B", "C"], 17)];
    let mut got = Vec::new();
    for (lits, want) in cases {
        for mode in [Mode::BlockOps, Mode::BigIntFaithful] {
            let mask = build_clause_mask(&abc_clause(lits), 3, mode).map_err(|e| e.to_string())?;
            let value = mask.words()[0];
            ensure(value == want, || format!("{lits:?} in {mode:?} gave {value}, want {want}"))?;
        }
        got.push(want.to_string());
    }
    Ok(format!("values {} in both modes", got.join(", ")))
}

fn criterion_3() -> Check {
    let f = Formula::new(1, vec![[Literal::pos(0)].into_iter().collect(), [Literal::neg(0)].into_iter().collect()]);
    for mode in [Mode::BlockOps, Mode::BigIntFaithful] {
        let r = decide(&f, &SolveOptions::with_mode(mode)).map_err(|e| e.to_string())?;
        ensure(r.decision == Decision::Unsatisfiable && r.halted_at_clause == Some(1), || {
            format!("{mode:?}: {:?} halted at {:?}", r.decision, r.halted_at_clause)
        })?;
    }
    // Extra clauses after the complementary pair are never looked at.
    let mut padded = f.clone();
    padded.var_count = 4;
    padded.names = (1..=4).map(|i| i.to_string()).collect();
    padded.clauses.extend((1..4).map(|j| [Literal::pos(j)].into_iter().collect::<Clause>()));
    let r = decide(&padded, &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.halted_at_clause == Some(1) && r.counters.masks_built == 2, || {
        format!("padded formula halted at {:?} after {} masks", r.halted_at_clause, r.counters.masks_built)
    })?;
    Ok("UNSATISFIABLE, halted_at_clause = 1".into())
}

fn criterion_4() -> Check {
    let base = table_formula(3).map_err(|e| e.to_string())?;
    let clauses: Vec<Clause> = table_rows(3).map_err(|e| e.to_string())?.into_iter().map(|r| r.clause).collect();
    let n = clauses.len();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for a in 0..n {
        subsets.push(vec![a]);
        for b in a + 1..n {
            subsets.push(vec![a, b]);
            for c in b + 1..n {
                subsets.push(vec![a, b, c]);
            }
        }
    }
    ensure(subsets.len() == 2951, || format!("{} formulas, expected 2951", subsets.len()))?;
    let (mut sat, mut disagreements) = (0, 0);
    for subset in &subsets {
        let f = Formula { clauses: subset.iter().map(|&i| clauses[i].clone()).collect(), ..base.clone() };
        let truth = brute_force(&f).map_err(|e| e.to_string())?.decision;
        for mode in [Mode::BlockOps, Mode::BigIntFaithful] {
            if decide(&f, &SolveOptions::with_mode(mode)).map_err(|e| e.to_string())?.decision != truth {
                disagreements += 1;
            }
        }
        sat += usize::from(truth.is_sat());
    }
    ensure(disagreements == 0, || format!("{disagreements} disagreements"))?;
    Ok(format!("2951 formulas ({sat} SAT, {} UNSAT), 0 disagreements", 2951 - sat))
}

fn criterion_5(corpus: &[Formula]) -> Check {
    let (mut sat, mut disagreements) = (0, Vec::new());
    for (i, f) in corpus.iter().enumerate() {
        let mask = decide(f, &SolveOptions::default()).map_err(|e| e.to_string())?.decision;
        let brute = brute_force(f).map_err(|e| e.to_string())?;
        let search = dpll(f);
        if mask != brute.decision || mask != search.decision {
            disagreements.push(i);
        }
        for witness in [&brute.witness, &search.witness].into_iter().flatten() {
            if !evaluate(f, witness).map_err(|e| e.to_string())? {
                disagreements.push(i);
            }
        }
        sat += usize::from(mask.is_sat());
    }
    let ks: BTreeSet<usize> = corpus.iter().flat_map(|f| f.clauses.iter().map(Clause::len)).collect();
    ensure(disagreements.is_empty(), || format!("disagreements at instances {disagreements:?}"))?;
    ensure(ks == BTreeSet::from([1, 2, 3, 4]), || format!("clause widths {ks:?}"))?;
    Ok(format!("{} instances ({sat} SAT, {} UNSAT), 0 disagreements", corpus.len(), corpus.len() - sat))
}

fn criterion_6(corpus: &[Formula]) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let count = 10_000;
    for i in 0..count {
        let v = rng.gen_range(1..=12usize);
        let clause: Clause = (0..v as u32)
            .filter_map(|j| match rng.gen_range(0..3) {
                0 => Some(Literal::pos(j)),
                1 => Some(Literal::neg(j)),
                _ => None,
            })
            .collect();
        let block = build_clause_mask(&clause, v, Mode::BlockOps).map_err(|e| e.to_string())?;
        let faithful = build_clause_mask(&clause, v, Mode::BigIntFaithful).map_err(|e| e.to_string())?;
        ensure(block == faithful, || format!("clause {i} over {v} variables differs"))?;
    }
    for (i, f) in corpus.iter().enumerate() {
        let a = decide(f, &SolveOptions::with_mode(Mode::BlockOps)).map_err(|e| e.to_string())?;
        let b = decide(f, &SolveOptions::with_mode(Mode::BigIntFaithful)).map_err(|e| e.to_string())?;
        ensure(a.decision == b.decision && a.halted_at_clause == b.halted_at_clause, || {
            format!("instance {i}: {:?} vs {:?}", a.decision, b.decision)
        })?;
    }
    Ok(format!("{count} clause masks bit-identical, {} decisions identical", corpus.len()))
}

fn criterion_7(corpus: &[Formula]) -> Check {
    let mut checked = 0;
    for (i, f) in corpus.iter().enumerate() {
        let report = decide(f, &SolveOptions::default().keep_field()).map_err(|e| e.to_string())?;
        if !report.decision.is_sat() {
            continue;
        }
        let models = extract_models(&report, f, None).map_err(|e| e.to_string())?;
        let truth = all_models(f, 10).map_err(|e| e.to_string())?;
        ensure(models == truth, || format!("instance {i}: {} models vs {}", models.len(), truth.len()))?;
        checked += 1;
    }
    let f = Formula { clauses: vec![abc_clause(&["A", "B", "C"])], ..table_formula(3).unwrap() };
    let report = decide(&f, &SolveOptions::default().keep_field()).map_err(|e| e.to_string())?;
    let first = extract_models(&report, &f, Some(1)).map_err(|e| e.to_string())?;
    let abc: Vec<bool> = ["A", "B", "C"].iter().map(|n| first[0].value(f.var_by_name(n).unwrap())).collect();
    ensure(abc == [false, false, true], || format!("first model (A,B,C) = {abc:?}"))?;
    Ok(format!("{checked} SAT instances match brute-force model sets; first model (A,B,C)=(0,0,1)"))
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn criterion_8() -> Check {
    const MEMORY_CAP: u64 = 512 << 20;
    // (a) the accumulator occupies 2^v bits.
    for v in 1..=24usize {
        let f = bench::generate(&bench::GenSpec { v, c: 1, k: 1, seed: v as u64, allow_duplicate_clauses: true })
            .map_err(|e| e.to_string())?;
        let modes: &[Mode] = if v <= 16 { &[Mode::BlockOps, Mode::BigIntFaithful] } else { &[Mode::BlockOps] };
        for &mode in modes {
            let peak = decide(&f, &SolveOptions::with_mode(mode)).map_err(|e| e.to_string())?.peak_field_bytes;
            let exact = (1u64 << v).div_ceil(8);
            let rounded = exact.div_ceil(8) * 8;
            ensure((exact..=rounded).contains(&peak), || {
                format!("v={v} {mode:?}: peak_field_bytes {peak}, expected {exact}..={rounded}")
            })?;
        }
    }

    // (b) scaling run.
    let config = ScalingConfig {
        v_min: 14,
        v_max: 24,
        ratio: 4.3,
        k: 3,
        reps: 5,
        timed_runs: 5,
        threads: 1,
        seed: 8,
        ..Default::default()
    };
    let records = run_scaling(&config).map_err(|e| e.to_string())?;
    ensure(records.iter().all(|r| r.decision != RunOutcome::Capped), || "capped rows in scaling run".into())?;
    let report = fit_report(&records).map_err(|e| e.to_string())?;
    println!("        {}", report.verdict);
    ensure(report.exponential.rms_residual < report.quadratic.rms_residual, || {
        format!(
            "exponential residual {:.4} not below quadratic residual {:.4}",
            report.exponential.rms_residual, report.quadratic.rms_residual
        )
    })?;
    let steps: Vec<(usize, f64)> = report.step_ratios.iter().copied().filter(|&(v, _)| (18..24).contains(&v)).collect();
    ensure(steps.len() == 6, || format!("{} steps over 18..24", steps.len()))?;
    let worst = steps.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    ensure(worst >= 1.5, || format!("step ratios over 18..24: {steps:?}"))?;

    // (c) planted exponents.
    let synthetic = |f: &dyn Fn(&ScalingRecord) -> f64| -> Vec<ScalingRecord> {
        (10..=24)
            .map(|v| {
                let mut r = ScalingRecord {
                    mode: Mode::BlockOps,
                    v,
                    c: bench::clauses_for(v, 4.3),
                    k: 3,
                    seed: 0,
                    decision: RunOutcome::Sat,
                    wall_time_ns: 0,
                    bit_ops: 0,
                    words_touched: 0,
                    peak_field_bytes: 0,
                };
                r.wall_time_ns = f(&r).round() as u64;
                r
            })
            .collect()
    };
    let planted: f64 = 1.37;
    let exp = fit_report(&synthetic(&|r| 1000.0 * planted.powi(r.v as i32))).map_err(|e| e.to_string())?;
    ensure((exp.doubling_factor / planted - 1.0).abs() < 0.01, || {
        format!("planted growth {planted}, recovered {}", exp.doubling_factor)
    })?;
    let poly = fit_report(&synthetic(&|r| 50.0 * ((r.c * r.v * r.k) as f64).powf(2.0))).map_err(|e| e.to_string())?;
    ensure((poly.power_law.slope / 2.0 - 1.0).abs() < 0.01, || {
        format!("planted exponent 2, recovered {}", poly.power_law.slope)
    })?;
    ensure(poly.quadratic.rms_residual < exp.quadratic.rms_residual, || {
        "quadratic fit does not prefer quadratic data".into()
    })?;

    let rss = peak_rss_bytes();
    if let Some(rss) = rss {
        ensure(rss < MEMORY_CAP, || format!("peak resident set {} MiB", rss >> 20))?;
    }
    Ok(format!(
        "peak bytes = ceil(2^v/8); residual exp {:.3} < quadratic {:.3}; min step ratio {worst:.2}; planted x{planted} and n^2 recovered; peak RSS {}",
        report.exponential.rms_residual,
        report.quadratic.rms_residual,
        rss.map_or("unknown".into(), |b| format!("{} MiB", b >> 20)),
    ))
}

fn criterion_9(corpus: &[Formula]) -> Check {
    for (i, f) in corpus.iter().enumerate() {
        let text = write_dimacs(f);
        let back = parse_dimacs(text.as_bytes()).map_err(|e| format!("instance {i}: {e}"))?;
        ensure(&back == f, || format!("instance {i} does not round-trip"))?;
        ensure(write_dimacs(&back) == text, || format!("instance {i} text differs"))?;
    }
    let cases: [(&str, &str, usize); 3] = [
        ("malformed header", "p cnf x 1\n1 0\n", 1),
        ("literal beyond declared count", "p cnf 2 2\n1 -2 0\n-1 3 0\n", 3),
        ("missing terminating 0", "p cnf 2 2\n1 2 0\n-1\n-2\n", 4),
    ];
    for (name, text, line) in cases {
        match parse_dimacs(text.as_bytes()) {
            Err(e @ CnfError::Parse { .. }) => {
                ensure(e.line() == Some(line) && e.to_string().contains(&format!("line {line}")), || {
                    format!("{name}: `{e}` does not name line {line}")
                })?
            }
            other => return Err(format!("{name}: expected a parse error, got {other:?}")),
        }
    }
    Ok(format!("{} instances round-trip; 3 error cases name their line", corpus.len()))
}

fn main() {
    let started = Instant::now();
    let corpus = corpus();
    let criteria: Vec<Criterion> = vec![
        ("1 tables", Duration::from_secs(1), Box::new(criterion_1)),
        ("2 worked values", Duration::from_secs(1), Box::new(criterion_2)),
        ("3 complementary units", Duration::from_secs(1), Box::new(criterion_3)),
        ("4 exhaustive three-variable", Duration::from_secs(30), Box::new(criterion_4)),
        ("5 randomized oracles", Duration::from_secs(300), Box::new(|| criterion_5(&corpus))),
        ("6 mode equivalence", Duration::from_secs(120), Box::new(|| criterion_6(&corpus))),
        ("7 model extraction", Duration::from_secs(120), Box::new(|| criterion_7(&corpus))),
        ("8 complexity audit", Duration::from_secs(900), Box::new(criterion_8)),
        ("9 parser robustness", Duration::from_secs(60), Box::new(|| criterion_9(&corpus))),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let t = Instant::now();
        let mut result = check();
        let elapsed = t.elapsed();
        if let Ok(detail) = &result {
            if elapsed > *budget {
                result = Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS  criterion {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("{} of {} criteria passed in {:.2?}", criteria.len() - failed, criteria.len(), started.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
