//! CNF data model: literals, clauses and formulas with a dense variable
//! indexing, plus DIMACS and inline-text readers, a DIMACS writer,
//! canonicalization and variable reordering.
//!
//! A [`VarId`] is the position of a variable in the processing order used by
//! the mask engine. Bit `j` of an assignment index is the value of `VarId(j)`,
//! so reordering variables changes every mask but never a decision.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: VarId,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Self {
        Literal { var: VarId(var), negated: false }
    }

    pub fn neg(var: u32) -> Self {
        Literal { var: VarId(var), negated: true }
    }

    /// True if the literal holds when its variable takes `value`.
    pub fn satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    pub literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause { literals }
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// True if some variable appears both plain and negated.
    pub fn is_tautology(&self) -> bool {
        self.literals
            .iter()
            .enumerate()
            .any(|(i, a)| self.literals[i + 1..].iter().any(|b| a.var == b.var && a.negated != b.negated))
    }
}

impl FromIterator<Literal> for Clause {
    fn from_iter<T: IntoIterator<Item = Literal>>(iter: T) -> Self {
        Clause { literals: iter.into_iter().collect() }
    }
}

/// Truth values indexed by `VarId`. Index `k` of the assignment space
/// decodes to `values[j] = bit j of k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn from_index(k: u64, var_count: usize) -> Self {
        Assignment((0..var_count).map(|j| j < 64 && k >> j & 1 == 1).collect())
    }

    /// Inverse of [`Assignment::from_index`]; `None` beyond 64 variables.
    pub fn index(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().enumerate().fold(0, |k, (j, &b)| k | (b as u64) << j))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, var: VarId) -> bool {
        self.0[var.index()]
    }
}

/// A CNF formula. `names[j]` is the external name of `VarId(j)`; for DIMACS
/// input that is the decimal variable number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub clauses: Vec<Clause>,
    pub var_count: usize,
    pub names: Vec<String>,
}

impl Formula {
    /// Builds a formula whose variables are named `1..=var_count`.
    pub fn new(var_count: usize, clauses: Vec<Clause>) -> Self {
        Formula { clauses, var_count, names: numeric_names(var_count) }
    }

    pub fn with_names(names: Vec<String>, clauses: Vec<Clause>) -> Self {
        Formula { clauses, var_count: names.len(), names }
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn literal_count(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    pub fn name(&self, var: VarId) -> &str {
        &self.names[var.index()]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(|i| VarId(i as u32))
    }

    /// Checks that every referenced variable is below `var_count` and that
    /// the name table covers exactly `var_count` variables.
    pub fn validate(&self) -> Result<(), CnfError> {
        if self.names.len() != self.var_count {
            return Err(CnfError::NameTable { names: self.names.len(), vars: self.var_count });
        }
        for (index, clause) in self.clauses.iter().enumerate() {
            if let Some(lit) = clause.literals.iter().find(|l| l.var.index() >= self.var_count) {
                return Err(CnfError::VarOutOfRange { clause: index, var: lit.var.0, var_count: self.var_count });
            }
        }
        Ok(())
    }

    /// True if no clause repeats a variable.
    pub fn is_canonical(&self) -> bool {
        let mut seen = vec![usize::MAX; self.var_count];
        for (index, clause) in self.clauses.iter().enumerate() {
            for lit in &clause.literals {
                match seen.get_mut(lit.var.index()) {
                    Some(slot) if *slot == index => return false,
                    Some(slot) => *slot = index,
                    None => return false,
                }
            }
        }
        true
    }

    /// Renders the formula in the inline text grammar, e.g. `(A | ~B) & (C)`.
    pub fn to_inline(&self) -> String {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                let lits: Vec<String> = c
                    .literals
                    .iter()
                    .map(|l| format!("{}{}", if l.negated { "~" } else { "" }, self.name(l.var)))
                    .collect();
                format!("({})", lits.join(" | "))
            })
            .collect();
        parts.join(" & ")
    }
}

fn numeric_names(var_count: usize) -> Vec<String> {
    (1..=var_count).map(|k| k.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Clauses with complementary literals are an error.
    Strict,
    /// Clauses with complementary literals are dropped.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum OrderScheme {
    #[default]
    FirstOccurrence,
    Sorted,
    /// `list[i]` is the current `VarId` that becomes `VarId(i)`.
    Explicit(Vec<VarId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("empty input")]
    EmptyInput,
    #[error("clause {clause} contains a variable and its negation")]
    Tautology { clause: usize },
    #[error("clause {clause} references variable {var} but the formula has {var_count} variables")]
    VarOutOfRange { clause: usize, var: u32, var_count: usize },
    #[error("name table has {names} entries for {vars} variables")]
    NameTable { names: usize, vars: usize },
    #[error("explicit order is not a permutation of 0..{var_count}")]
    NotAPermutation { var_count: usize },
}

impl CnfError {
    fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        CnfError::Parse { line, column, message: message.into() }
    }

    /// 1-based line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            CnfError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Parses DIMACS CNF. Variable `k` maps to `VarId(k - 1)`; the header's
/// variable count is kept even if some variables never occur.
pub fn parse_dimacs(text: &[u8]) -> Result<Formula, CnfError> {
    let text = std::str::from_utf8(text)
        .ok()
        .filter(|t| t.is_ascii())
        .ok_or_else(|| CnfError::parse(1, 1, "input is not ASCII"))?;

    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut open_at: Option<(usize, usize)> = None;
    let mut max_var = 0usize;
    let mut last_line = 0;

    for (line_index, raw_line) in text.split('\n').enumerate() {
        let line_no = line_index + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        last_line = line_no;
        let indent = line.len() - trimmed.len();
        match trimmed.as_bytes()[0] {
            b'c' => continue,
            b'%' => break,
            b'p' => {
                if header.is_some() {
                    return Err(CnfError::parse(line_no, indent + 1, "duplicate header line"));
                }
                if !clauses.is_empty() || !current.is_empty() {
                    return Err(CnfError::parse(line_no, indent + 1, "header after clause data"));
                }
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                let parsed = match fields.as_slice() {
                    ["p", "cnf", v, c] => v.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
                    _ => None,
                };
                let (vars, count) = parsed.ok_or_else(|| {
                    CnfError::parse(line_no, indent + 1, "malformed header, expected `p cnf <nvars> <nclauses>`")
                })?;
                if vars > u32::MAX as usize {
                    return Err(CnfError::parse(line_no, indent + 1, "variable count too large"));
                }
                header = Some((vars, count, line_no));
            }
            _ => {
                for (column, token) in tokens(line) {
                    let value: i64 = token
                        .parse()
                        .map_err(|_| CnfError::parse(line_no, column, format!("invalid literal `{token}`")))?;
                    if value == 0 {
                        clauses.push(Clause::new(std::mem::take(&mut current)));
                        open_at = None;
                        continue;
                    }
                    let magnitude = value.unsigned_abs() as usize;
                    if let Some((vars, _, _)) = header {
                        if magnitude > vars {
                            return Err(CnfError::parse(
                                line_no,
                                column,
                                format!("literal {value} out of declared range 1..={vars}"),
                            ));
                        }
                    } else if magnitude > u32::MAX as usize {
                        return Err(CnfError::parse(line_no, column, format!("literal {value} too large")));
                    }
                    max_var = max_var.max(magnitude);
                    open_at.get_or_insert((line_no, column));
                    current.push(Literal { var: VarId(magnitude as u32 - 1), negated: value < 0 });
                }
            }
        }
    }

    if let Some((line, column)) = open_at {
        return Err(CnfError::parse(
            last_line.max(line),
            column,
            format!("clause starting at line {line} is missing its terminating 0"),
        ));
    }
    let var_count = match header {
        Some((vars, count, line)) => {
            if count != clauses.len() {
                return Err(CnfError::parse(
                    line,
                    1,
                    format!("header declares {count} clauses but {} were found", clauses.len()),
                ));
            }
            vars
        }
        None if clauses.is_empty() => return Err(CnfError::EmptyInput),
        None => max_var,
    };
    Ok(Formula::new(var_count, clauses))
}

fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let len = rest[start..].find(char::is_whitespace).unwrap_or(rest.len() - start);
        let token = &rest[start..start + len];
        let column = offset + start + 1;
        offset += start + len;
        rest = &rest[start + len..];
        Some((column, token))
    })
}

/// Writes DIMACS using processing indices: `VarId(j)` is written as `j + 1`.
pub fn write_dimacs(formula: &Formula) -> String {
    let mut out = format!("p cnf {} {}\n", formula.var_count, formula.clauses.len());
    for clause in &formula.clauses {
        for lit in &clause.literals {
            let n = lit.var.0 as i64 + 1;
            out.push_str(&(if lit.negated { -n } else { n }).to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// Parses the inline grammar: clauses joined by `&`, literals joined by `|`,
/// negation `~` or `!`, optional parentheses around each clause. `()` is the
/// empty clause. Variables are numbered in order of first appearance.
pub fn parse_inline(text: &str) -> Result<Formula, CnfError> {
    InlineParser::new(text).formula()
}

struct InlineParser<'a> {
    chars: Vec<(usize, usize, char)>,
    pos: usize,
    names: Vec<String>,
    lookup: HashMap<String, u32>,
    text: &'a str,
}

impl<'a> InlineParser<'a> {
    fn new(text: &'a str) -> Self {
        let mut chars = Vec::with_capacity(text.len());
        let (mut line, mut column) = (1, 1);
        for ch in text.chars() {
            chars.push((line, column, ch));
            if ch == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        InlineParser { chars, pos: 0, names: Vec::new(), lookup: HashMap::new(), text }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.2.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.2)
    }

    fn here(&self) -> (usize, usize) {
        match self.chars.get(self.pos) {
            Some(&(l, c, _)) => (l, c),
            None => {
                let lines = self.text.split('\n').count();
                let last = self.text.rsplit('\n').next().unwrap_or("");
                (lines, last.chars().count() + 1)
            }
        }
    }

    fn error(&self, message: impl Into<String>) -> CnfError {
        let (line, column) = self.here();
        CnfError::parse(line, column, message)
    }

    fn formula(mut self) -> Result<Formula, CnfError> {
        if self.peek().is_none() {
            return Err(CnfError::EmptyInput);
        }
        let mut clauses = vec![self.clause()?];
        while let Some(c) = self.peek() {
            if c != '&' {
                return Err(self.error(format!("expected `&`, found `{c}`")));
            }
            self.pos += 1;
            clauses.push(self.clause()?);
        }
        Ok(Formula::with_names(self.names, clauses))
    }

    fn clause(&mut self) -> Result<Clause, CnfError> {
        let parenthesized = self.peek() == Some('(');
        if parenthesized {
            self.pos += 1;
            if self.peek() == Some(')') {
                self.pos += 1;
                return Ok(Clause::default());
            }
        }
        let mut literals = vec![self.literal()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            literals.push(self.literal()?);
        }
        if parenthesized {
            match self.peek() {
                Some(')') => self.pos += 1,
                Some(c) => return Err(self.error(format!("expected `)` or `|`, found `{c}`"))),
                None => return Err(self.error("unclosed `(`")),
            }
        }
        Ok(Clause::new(literals))
    }

    fn literal(&mut self) -> Result<Literal, CnfError> {
        let mut negated = false;
        while matches!(self.peek(), Some('~') | Some('!')) {
            negated = !negated;
            self.pos += 1;
        }
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            Some(c) => return Err(self.error(format!("expected a variable name, found `{c}`"))),
            None => return Err(self.error("expected a variable name, found end of input")),
        }
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.2.is_ascii_alphanumeric() || c.2 == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().map(|c| c.2).collect();
        let next = self.names.len() as u32;
        let id = *self.lookup.entry(name.clone()).or_insert_with(|| {
            self.names.push(name);
            next
        });
        Ok(Literal { var: VarId(id), negated })
    }
}

/// Merges duplicate literals and handles clauses holding a variable and its
/// negation according to `policy`. Empty clauses are kept.
pub fn canonicalize(raw: &Formula, policy: Policy) -> Result<Formula, CnfError> {
    raw.validate()?;
    let mut clauses = Vec::with_capacity(raw.clauses.len());
    for (index, clause) in raw.clauses.iter().enumerate() {
        if clause.is_tautology() {
            match policy {
                Policy::Strict => return Err(CnfError::Tautology { clause: index }),
                Policy::Lenient => continue,
            }
        }
        let mut literals: Vec<Literal> = Vec::with_capacity(clause.len());
        for &lit in &clause.literals {
            if !literals.contains(&lit) {
                literals.push(lit);
            }
        }
        clauses.push(Clause::new(literals));
    }
    Ok(Formula { clauses, var_count: raw.var_count, names: raw.names.clone() })
}

/// Compares names numerically when both are integers, otherwise as strings.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Reindexes variables so that processing order follows `scheme`. Names
/// travel with their variables.
pub fn variable_order(raw: &Formula, scheme: &OrderScheme) -> Result<Formula, CnfError> {
    raw.validate()?;
    let v = raw.var_count;
    let order: Vec<usize> = match scheme {
        OrderScheme::FirstOccurrence => {
            let mut seen = vec![false; v];
            let mut order = Vec::with_capacity(v);
            for lit in raw.clauses.iter().flat_map(|c| &c.literals) {
                if !std::mem::replace(&mut seen[lit.var.index()], true) {
                    order.push(lit.var.index());
                }
            }
            order.extend((0..v).filter(|&j| !seen[j]));
            order
        }
        OrderScheme::Sorted => {
            let mut order: Vec<usize> = (0..v).collect();
            order.sort_by(|&a, &b| natural_cmp(&raw.names[a], &raw.names[b]));
            order
        }
        OrderScheme::Explicit(list) => {
            let mut seen = vec![false; v];
            let valid = list.len() == v
                && list.iter().all(|id| id.index() < v && !std::mem::replace(&mut seen[id.index()], true));
            if !valid {
                return Err(CnfError::NotAPermutation { var_count: v });
            }
            list.iter().map(|id| id.index()).collect()
        }
    };

    let mut new_id = vec![0u32; v];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new as u32;
    }
    let clauses = raw
        .clauses
        .iter()
        .map(|c| c.literals.iter().map(|l| Literal { var: VarId(new_id[l.var.index()]), negated: l.negated }).collect())
        .collect();
    let names = order.iter().map(|&old| raw.names[old].clone()).collect();
    Ok(Formula { clauses, var_count: v, names })
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_inline())
    }
}
