//! Reference solvers used to check the mask engine: exhaustive truth-table
//! search and a plain DPLL. Neither shares code with the mask engine.

use thiserror::Error;

use crate::cnf::{Assignment, Clause, Formula};
use crate::maskset::Decision;

/// Default variable limit for [`brute_force`].
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub decision: Decision,
    pub witness: Option<Assignment>,
    /// Assignments evaluated (brute force) or branch leaves reached (DPLL).
    pub assignments_checked: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{var_count} variables exceed the brute-force limit of {limit}")]
    TooManyVariables { var_count: usize, limit: usize },
    #[error("assignment has {got} values for {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
}

/// True iff every clause has a literal made true by `assignment`.
pub fn evaluate(formula: &Formula, assignment: &Assignment) -> Result<bool, OracleError> {
    if assignment.len() != formula.var_count {
        return Err(OracleError::LengthMismatch { expected: formula.var_count, got: assignment.len() });
    }
    Ok(formula.clauses.iter().all(|c| clause_holds(c, &assignment.0)))
}

fn clause_holds(clause: &Clause, values: &[bool]) -> bool {
    clause.literals.iter().any(|l| values[l.var.index()] != l.negated)
}

pub fn brute_force(formula: &Formula) -> Result<OracleResult, OracleError> {
    brute_force_with_limit(formula, DEFAULT_BRUTE_FORCE_LIMIT)
}

/// Tries assignments `k = 0, 1, ...` and returns the first model found.
pub fn brute_force_with_limit(formula: &Formula, limit: usize) -> Result<OracleResult, OracleError> {
    let v = formula.var_count;
    if v > limit || v >= 64 {
        return Err(OracleError::TooManyVariables { var_count: v, limit });
    }
    let mut values = vec![false; v];
    for k in 0..1u64 << v {
        for (j, slot) in values.iter_mut().enumerate() {
            *slot = k >> j & 1 == 1;
        }
        if formula.clauses.iter().all(|c| clause_holds(c, &values)) {
            return Ok(OracleResult {
                decision: Decision::Satisfiable,
                witness: Some(Assignment(values)),
                assignments_checked: k + 1,
            });
        }
    }
    Ok(OracleResult { decision: Decision::Unsatisfiable, witness: None, assignments_checked: 1 << v })
}

/// Every satisfying assignment, ascending by index.
pub fn all_models(formula: &Formula, limit: usize) -> Result<Vec<Assignment>, OracleError> {
    let v = formula.var_count;
    if v > limit || v >= 64 {
        return Err(OracleError::TooManyVariables { var_count: v, limit });
    }
    Ok((0..1u64 << v)
        .map(|k| Assignment::from_index(k, v))
        .filter(|a| formula.clauses.iter().all(|c| clause_holds(c, &a.0)))
        .collect())
}

/// DPLL with unit propagation, branching on the lowest unassigned variable,
/// false first. The witness is checked with [`evaluate`] before returning.
pub fn dpll(formula: &Formula) -> OracleResult {
    let mut search = Dpll { formula, leaves: 0 };
    let mut values = vec![None; formula.var_count];
    let found = search.solve(&mut values);
    let witness = found.then(|| Assignment(values.iter().map(|v| v.unwrap_or(false)).collect()));
    if let Some(w) = &witness {
        assert!(evaluate(formula, w).unwrap_or(false), "DPLL produced an assignment that does not satisfy the formula");
    }
    OracleResult {
        decision: if found { Decision::Satisfiable } else { Decision::Unsatisfiable },
        witness,
        assignments_checked: search.leaves,
    }
}

struct Dpll<'a> {
    formula: &'a Formula,
    leaves: u64,
}

enum Status {
    Conflict,
    Unit(usize, bool),
    Open,
    Done,
}

impl Dpll<'_> {
    fn status(&self, values: &[Option<bool>]) -> Status {
        let mut all_satisfied = true;
        for clause in &self.formula.clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut satisfied = false;
            for lit in &clause.literals {
                match values[lit.var.index()] {
                    Some(v) if v != lit.negated => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        open += 1;
                        unassigned = Some(lit);
                    }
                }
            }
            if satisfied {
                continue;
            }
            all_satisfied = false;
            match (open, unassigned) {
                (0, _) => return Status::Conflict,
                (1, Some(lit)) => return Status::Unit(lit.var.index(), !lit.negated),
                _ => {}
            }
        }
        if all_satisfied {
            Status::Done
        } else {
            Status::Open
        }
    }

    fn solve(&mut self, values: &mut [Option<bool>]) -> bool {
        let mut propagated = Vec::new();
        loop {
            match self.status(values) {
                Status::Conflict => {
                    self.leaves += 1;
                    for var in propagated {
                        values[var] = None;
                    }
                    return false;
                }
                Status::Done => {
                    self.leaves += 1;
                    return true;
                }
                Status::Unit(var, value) => {
                    values[var] = Some(value);
                    propagated.push(var);
                }
                Status::Open => break,
            }
        }
        let var = values.iter().position(Option::is_none).expect("open clauses have unassigned variables");
        for value in [false, true] {
            values[var] = Some(value);
            if self.solve(values) {
                return true;
            }
        }
        values[var] = None;
        for var in propagated {
            values[var] = None;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{Literal, VarId};

    fn f(v: usize, clauses: &[&[i32]]) -> Formula {
        Formula::new(
            v,
            clauses
                .iter()
                .map(|c| c.iter().map(|&x| Literal { var: VarId(x.unsigned_abs() - 1), negated: x < 0 }).collect())
                .collect(),
        )
    }

    #[test]
    fn complementary_units() {
        let g = f(1, &[&[1], &[-1]]);
        let r = brute_force(&g).unwrap();
        assert_eq!((r.decision, r.assignments_checked), (Decision::Unsatisfiable, 2));
        assert_eq!(dpll(&g).decision, Decision::Unsatisfiable);
    }

    #[test]
    fn lowest_witness() {
        // Variables in processing order C, B, A; one clause (A | B | C).
        let g = f(3, &[&[1, 2, 3]]);
        let r = brute_force(&g).unwrap();
        assert_eq!(r.witness, Some(Assignment(vec![true, false, false])));
        assert_eq!(r.witness.unwrap().index(), Some(1));
    }

    #[test]
    fn empty_formula() {
        let g = Formula::new(0, vec![]);
        let r = brute_force(&g).unwrap();
        assert_eq!((r.decision, r.witness), (Decision::Satisfiable, Some(Assignment(vec![]))));
        assert_eq!(dpll(&g).decision, Decision::Satisfiable);
        assert!(evaluate(&f(2, &[]), &Assignment(vec![true, false])).unwrap());
    }

    #[test]
    fn evaluate_examples() {
        assert!(evaluate(&f(2, &[&[1, -2]]), &Assignment(vec![false, false])).unwrap());
        assert!(!evaluate(&f(2, &[&[1], &[2]]), &Assignment(vec![true, false])).unwrap());
        assert_eq!(
            evaluate(&f(2, &[&[1]]), &Assignment(vec![true])),
            Err(OracleError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn limit() {
        let g = Formula::new(5, vec![]);
        assert!(matches!(brute_force_with_limit(&g, 4), Err(OracleError::TooManyVariables { .. })));
    }

    #[test]
    fn empty_clause_is_unsat() {
        let g = f(2, &[&[1], &[]]);
        assert_eq!(brute_force(&g).unwrap().decision, Decision::Unsatisfiable);
        assert_eq!(dpll(&g).decision, Decision::Unsatisfiable);
    }

    /// Pigeon `p` in hole `h` is variable `p * holes + h + 1`.
    fn pigeonhole(pigeons: usize, holes: usize) -> Formula {
        let var = |p: usize, h: usize| (p * holes + h + 1) as i32;
        let mut clauses: Vec<Vec<i32>> = (0..pigeons).map(|p| (0..holes).map(|h| var(p, h)).collect()).collect();
        for h in 0..holes {
            for a in 0..pigeons {
                for b in a + 1..pigeons {
                    clauses.push(vec![-var(a, h), -var(b, h)]);
                }
            }
        }
        let refs: Vec<&[i32]> = clauses.iter().map(Vec::as_slice).collect();
        f(pigeons * holes, &refs)
    }

    #[test]
    fn pigeonhole_four_into_three() {
        let php = pigeonhole(4, 3);
        assert_eq!(brute_force(&php).unwrap().decision, Decision::Unsatisfiable);
        assert_eq!(dpll(&php).decision, Decision::Unsatisfiable);
        let fits = pigeonhole(3, 3);
        assert_eq!(dpll(&fits).decision, Decision::Satisfiable);
    }

    #[test]
    fn all_models_lists_ascending() {
        let g = f(2, &[&[1, 2]]);
        let models: Vec<u64> = all_models(&g, 10).unwrap().iter().map(|a| a.index().unwrap()).collect();
        assert_eq!(models, vec![1, 2, 3]);
    }
}
