//! Clause-mask decision procedure.
//!
//! Every clause is turned into a mask over the `2^v` assignments: bit `k` is
//! set iff the assignment decoded from `k` falsifies the clause. Masks are
//! ORed into an accumulator; the formula is unsatisfiable iff the accumulator
//! reaches all ones, and any clear bit left at the end is a model.
//!
//! Mask construction walks the variables in processing order with a block
//! size `p = 2^j` that doubles at each step, starting from the value 1:
//!
//! * positive literal: the mask is unchanged,
//! * negated literal: multiply by `2^p`,
//! * absent variable: multiply by `2^p + 1`.
//!
//! [`Mode::BigIntFaithful`] performs those multiplications on arbitrary
//! precision integers, squaring the base each step. [`Mode::BlockOps`] does
//! the same thing with block shifts and copies on a [`BitField`]; because all
//! set bits stay below `p` before step `j`, the two agree bit for bit.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitfield::{width_for_vars, BitField, BitFieldError, DEFAULT_MAX_WIDTH_BITS};
use crate::cnf::{Assignment, Clause, CnfError, Formula, Literal, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Mode {
    /// Literal big-integer multiplications, as written in the pseudocode.
    BigIntFaithful,
    /// Equivalent block shifts and copies on packed words.
    #[default]
    BlockOps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Satisfiable,
    Unsatisfiable,
}

impl Decision {
    pub fn is_sat(self) -> bool {
        self == Decision::Satisfiable
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Satisfiable => "SATISFIABLE",
            Decision::Unsatisfiable => "UNSATISFIABLE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error(transparent)]
    Field(#[from] BitFieldError),
    #[error(transparent)]
    Formula(#[from] CnfError),
    #[error("clause {clause} repeats a variable; canonicalize the formula first")]
    NotCanonical { clause: usize },
    #[error("formula is unsatisfiable, there are no models")]
    NoModels,
    #[error("final field was not retained; solve with keep_final_field")]
    FieldNotRetained,
    #[error("mask tables are limited to 5 variables, got {0}")]
    TableTooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    pub mode: Mode,
    pub max_width_bits: u64,
    /// Keep the accumulator in the report for model extraction.
    pub keep_final_field: bool,
    /// Maintain [`OpCounters`]; off means the counters stay zero.
    pub count_ops: bool,
    /// Fill leading and tile trailing runs of absent variables in one pass
    /// instead of one replication per variable. Block mode only.
    pub skip_absent_runs: bool,
    /// Build masks on the rayon pool, folding them in clause order.
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: Mode::BlockOps,
            max_width_bits: DEFAULT_MAX_WIDTH_BITS,
            keep_final_field: false,
            count_ops: true,
            skip_absent_runs: false,
            parallel: false,
        }
    }
}

impl SolveOptions {
    pub fn with_mode(mode: Mode) -> Self {
        SolveOptions { mode, ..Default::default() }
    }

    pub fn keep_field(mut self) -> Self {
        self.keep_final_field = true;
        self
    }
}

/// Bit-level work done by one solve. `bit_ops` counts bit positions written,
/// read or compared by shifts, copies, ORs and the all-ones scan;
/// `bigint_ops` counts whole-number operations, the unit-cost view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounters {
    pub masks_built: u64,
    pub bit_ops: u64,
    pub words_touched: u64,
    pub bigint_ops: u64,
}

impl OpCounters {
    fn touch(&mut self, bits: u64) {
        self.bit_ops += bits;
        self.words_touched += bits.div_ceil(64).max(1);
        self.bigint_ops += 1;
    }

    fn merge(&mut self, other: &OpCounters) {
        self.masks_built += other.masks_built;
        self.bit_ops += other.bit_ops;
        self.words_touched += other.words_touched;
        self.bigint_ops += other.bigint_ops;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveReport {
    pub decision: Decision,
    /// Clause at which the accumulator first reached all ones.
    pub halted_at_clause: Option<usize>,
    pub final_field: Option<BitField>,
    pub counters: OpCounters,
    /// Largest single field held, in bytes.
    pub peak_field_bytes: u64,
    pub wall_time: Duration,
    pub var_count: usize,
    pub clause_count: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseMask {
    pub mask: BitField,
    pub clause_index: usize,
}

struct BlockBuilder {
    var_count: usize,
    width: usize,
    skip_absent_runs: bool,
    count: bool,
}

impl BlockBuilder {
    fn build(&self, clause: &Clause, counters: &mut OpCounters) -> BitField {
        let mut mask = BitField::one(self.width);
        self.build_into(clause, &mut mask, counters);
        mask
    }

    /// Builds into an existing field of the right width, overwriting it.
    fn build_into(&self, clause: &Clause, mask: &mut BitField, counters: &mut OpCounters) {
        mask.reset_to_one();
        let mut polarity: Vec<Option<bool>> = vec![None; self.var_count];
        for lit in &clause.literals {
            polarity[lit.var.index()].get_or_insert(lit.negated);
        }
        let mut local = OpCounters { masks_built: 1, ..Default::default() };
        local.touch(self.width as u64);

        let (start, end) = if self.skip_absent_runs {
            let start = polarity.iter().position(Option::is_some).unwrap_or(self.var_count);
            let end = polarity.iter().rposition(Option::is_some).map_or(start, |j| j + 1);
            if start > 0 {
                mask.fill_low(1 << start);
                local.touch(1 << start);
            }
            (start, end)
        } else {
            (0, self.var_count)
        };

        for (j, sign) in polarity.iter().enumerate().take(end).skip(start) {
            let p = 1usize << j;
            match sign {
                Some(false) => {}
                Some(true) => {
                    mask.shift_into_upper(p);
                    local.touch(2 * p as u64);
                }
                None => {
                    mask.replicate_double(p);
                    local.touch(p as u64);
                }
            }
        }

        if end < self.var_count {
            mask.tile_low(1 << end);
            local.touch((self.width - (1 << end)) as u64);
        }
        if self.count {
            counters.merge(&local);
        }
    }
}

struct FaithfulBuilder {
    var_count: usize,
    count: bool,
}

impl FaithfulBuilder {
    fn build(&self, clause: &Clause, counters: &mut OpCounters) -> BigUint {
        let mut local = OpCounters { masks_built: 1, ..Default::default() };
        let mut base = BigUint::from(2u32);
        let mut value = BigUint::from(1u32);
        for variable in 0..self.var_count {
            let mut exists = false;
            for lit in &clause.literals {
                if lit.var.index() == variable {
                    exists = true;
                    if lit.negated {
                        local.touch(value.bits() + base.bits());
                        value *= &base;
                    }
                    break;
                }
            }
            if !exists {
                local.touch(value.bits() + base.bits());
                value *= &base + 1u32;
            }
            local.touch(2 * base.bits());
            base = &base * &base;
        }
        if self.count {
            counters.merge(&local);
        }
        value
    }
}

fn check_formula(formula: &Formula) -> Result<(), MaskError> {
    formula.validate()?;
    let mut seen = vec![usize::MAX; formula.var_count];
    for (index, clause) in formula.clauses.iter().enumerate() {
        for lit in &clause.literals {
            let slot = &mut seen[lit.var.index()];
            if *slot == index {
                return Err(MaskError::NotCanonical { clause: index });
            }
            *slot = index;
        }
    }
    Ok(())
}

/// Builds masks, in parallel batches when asked, and feeds them to `absorb`
/// in clause order. Returns the index of the clause at which `absorb` first
/// reported all ones.
fn fold_masks<M: Send>(
    clauses: &[Clause],
    parallel: bool,
    counters: &mut OpCounters,
    build: impl Fn(&Clause, &mut OpCounters) -> M + Sync,
    mut absorb: impl FnMut(M, &mut OpCounters) -> bool,
) -> Option<usize> {
    if !parallel {
        for (index, clause) in clauses.iter().enumerate() {
            let mask = build(clause, counters);
            if absorb(mask, counters) {
                return Some(index);
            }
        }
        return None;
    }
    let batch = rayon::current_num_threads().max(1);
    for (chunk_index, chunk) in clauses.chunks(batch).enumerate() {
        let built: Vec<(M, OpCounters)> = chunk
            .par_iter()
            .map(|clause| {
                let mut local = OpCounters::default();
                let mask = build(clause, &mut local);
                (mask, local)
            })
            .collect();
        for (_, local) in &built {
            counters.merge(local);
        }
        for (offset, (mask, _)) in built.into_iter().enumerate() {
            if absorb(mask, counters) {
                return Some(chunk_index * batch + offset);
            }
        }
    }
    None
}

/// Mask of one clause over `var_count` variables, default width cap.
pub fn build_clause_mask(clause: &Clause, var_count: usize, mode: Mode) -> Result<BitField, MaskError> {
    let opts = SolveOptions { mode, count_ops: false, ..Default::default() };
    build_clause_mask_with(clause, var_count, &opts)
}

pub fn build_clause_mask_with(clause: &Clause, var_count: usize, opts: &SolveOptions) -> Result<BitField, MaskError> {
    let width = width_for_vars(var_count, opts.max_width_bits)?;
    if let Some(lit) = clause.literals.iter().find(|l| l.var.index() >= var_count) {
        return Err(CnfError::VarOutOfRange { clause: 0, var: lit.var.0, var_count }.into());
    }
    let mut sink = OpCounters::default();
    Ok(match opts.mode {
        Mode::BlockOps => BlockBuilder { var_count, width, skip_absent_runs: opts.skip_absent_runs, count: false }
            .build(clause, &mut sink),
        Mode::BigIntFaithful => {
            let value = FaithfulBuilder { var_count, count: false }.build(clause, &mut sink);
            BitField::from_bignat(&value, width)?
        }
    })
}

/// All clause masks of a formula, in clause order.
pub fn clause_masks(formula: &Formula, opts: &SolveOptions) -> Result<Vec<ClauseMask>, MaskError> {
    check_formula(formula)?;
    formula
        .clauses
        .iter()
        .enumerate()
        .map(|(clause_index, clause)| {
            Ok(ClauseMask { mask: build_clause_mask_with(clause, formula.var_count, opts)?, clause_index })
        })
        .collect()
}

/// Decides satisfiability. Stops at the first clause after which every
/// assignment is falsified by some clause.
pub fn decide(formula: &Formula, opts: &SolveOptions) -> Result<SolveReport, MaskError> {
    check_formula(formula)?;
    let v = formula.var_count;
    let width = width_for_vars(v, opts.max_width_bits)?;
    let started = Instant::now();
    let mut counters = OpCounters::default();

    let (halted, final_field, peak) = match opts.mode {
        Mode::BlockOps => {
            let builder =
                BlockBuilder { var_count: v, width, skip_absent_runs: opts.skip_absent_runs, count: opts.count_ops };
            let mut acc = BitField::zeros(width);
            let word_count = acc.words().len();
            let mut cursor = 0;
            let count = opts.count_ops;
            let mut absorb = |mask: &BitField, c: &mut OpCounters| {
                acc.or_assign(mask).expect("masks share the accumulator width");
                // The accumulator only gains bits, so full words before
                // the cursor stay full.
                let next = acc.first_incomplete_word(cursor);
                if count {
                    c.touch(width as u64);
                    c.touch(((next - cursor + 1).min(word_count) * 64) as u64);
                }
                cursor = next;
                cursor == word_count
            };
            let halted = if opts.parallel {
                fold_masks(
                    &formula.clauses,
                    true,
                    &mut counters,
                    |clause, c| builder.build(clause, c),
                    |mask, c| absorb(&mask, c),
                )
            } else {
                // One scratch field serves every clause.
                let mut scratch = BitField::zeros(width);
                formula.clauses.iter().position(|clause| {
                    builder.build_into(clause, &mut scratch, &mut counters);
                    absorb(&scratch, &mut counters)
                })
            };
            let peak = acc.storage_bytes() as u64;
            (halted, acc, peak)
        }
        Mode::BigIntFaithful => {
            let builder = FaithfulBuilder { var_count: v, count: opts.count_ops };
            let unsolvable = (BigUint::from(1u32) << width) - 1u32;
            let mut result = BigUint::ZERO;
            let count = opts.count_ops;
            let halted = fold_masks(
                &formula.clauses,
                opts.parallel,
                &mut counters,
                |clause, c| builder.build(clause, c),
                |value, c| {
                    if count {
                        c.touch(result.bits().max(value.bits()));
                        c.touch(unsolvable.bits());
                    }
                    result |= value;
                    result == unsolvable
                },
            );
            let peak = (unsolvable.iter_u64_digits().len() * 8) as u64;
            (halted, BitField::from_bignat(&result, width)?, peak)
        }
    };

    let decision = if halted.is_some() { Decision::Unsatisfiable } else { Decision::Satisfiable };
    Ok(SolveReport {
        decision,
        halted_at_clause: halted,
        final_field: opts.keep_final_field.then_some(final_field),
        counters,
        peak_field_bytes: peak,
        wall_time: started.elapsed(),
        var_count: v,
        clause_count: formula.clauses.len(),
        mode: opts.mode,
    })
}

/// Reads models off the clear bits of the retained field, lowest index first.
pub fn extract_models(
    report: &SolveReport,
    formula: &Formula,
    limit: Option<usize>,
) -> Result<Vec<Assignment>, MaskError> {
    if report.decision == Decision::Unsatisfiable {
        return Err(MaskError::NoModels);
    }
    let field = report.final_field.as_ref().ok_or(MaskError::FieldNotRetained)?;
    Ok(field
        .clear_bits()
        .take(limit.unwrap_or(usize::MAX))
        .map(|k| Assignment::from_index(k as u64, formula.var_count))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    /// Clause over the table's formula (see [`table_formula`]).
    pub clause: Clause,
    /// Clause with letter names in display order, e.g. `A ¬B`.
    pub label: String,
    /// Truth value per column; columns run from all-true down to all-false.
    pub truth_row: Vec<bool>,
    pub mask_value: u64,
}

pub const MAX_TABLE_VARS: usize = 5;

const LETTERS: [&str; MAX_TABLE_VARS] = ["A", "B", "C", "D", "E"];

/// Formula skeleton for the tables: letters `A..` in display order, processed
/// in reverse, so `A` is the most significant bit of an assignment index.
pub fn table_formula(var_count: usize) -> Result<Formula, MaskError> {
    if var_count > MAX_TABLE_VARS {
        return Err(MaskError::TableTooLarge(var_count));
    }
    let names = (0..var_count).rev().map(|d| LETTERS[d].to_string()).collect();
    Ok(Formula::with_names(names, Vec::new()))
}

/// Every clause in which each variable is positive, negated or absent, except
/// the empty clause: `3^v - 1` rows, ordered by size, then by which letters
/// occur, then by sign with the leftmost letter varying slowest.
pub fn table_rows(var_count: usize) -> Result<Vec<TableRow>, MaskError> {
    table_formula(var_count)?;
    let columns = 1usize << var_count;
    let mut rows = Vec::new();
    for size in 1..=var_count {
        for letters in combinations(var_count, size) {
            for signs in 0..1u32 << size {
                let literals: Vec<Literal> = letters
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| Literal {
                        var: VarId((var_count - 1 - d) as u32),
                        negated: signs >> (size - 1 - i) & 1 == 1,
                    })
                    .collect();
                let label = letters
                    .iter()
                    .zip(&literals)
                    .map(|(&d, l)| format!("{}{}", if l.negated { "¬" } else { "" }, LETTERS[d]))
                    .collect::<Vec<_>>()
                    .join(" ");
                let truth_row = (0..columns)
                    .map(|column| {
                        let k = (columns - 1 - column) as u64;
                        literals.iter().any(|l| l.satisfied_by(k >> l.var.0 & 1 == 1))
                    })
                    .collect();
                let clause = Clause::new(literals);
                let mask = build_clause_mask(&clause, var_count, Mode::BlockOps)?;
                rows.push(TableRow { clause, label, truth_row, mask_value: mask.words()[0] });
            }
        }
    }
    Ok(rows)
}

/// `size`-element subsets of `0..n` in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, size: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            go(i + 1, n, size, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, size, &mut Vec::new(), &mut out);
    out
}
