//! Command-line driver. Exit codes follow SAT-solver convention: 10 after
//! printing `SATISFIABLE`, 20 after printing `UNSATISFIABLE`, 1 after an error
//! diagnostic on stderr, 0 for commands that make no decision.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{self, ScalingConfig, DEFAULT_RATIO};
use crate::bitfield::DEFAULT_MAX_WIDTH_BITS;
use crate::cnf::{self, natural_cmp, Assignment, Formula, OrderScheme, Policy, VarId};
use crate::maskset::{self, Decision, Mode, SolveOptions, SolveReport};
use crate::oracle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SAT: i32 = 10;
pub const EXIT_UNSAT: i32 = 20;

#[derive(Debug, Parser)]
#[command(name = "clausemask", version, about = "Clause-mask CNF satisfiability checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide satisfiability of a CNF file.
    Solve(SolveArgs),
    /// Print satisfying assignments read off the final mask.
    Model(ModelArgs),
    /// Print the truth-value and mask tables for every clause over v variables.
    Masks(MasksArgs),
    /// Cross-check the mask engine against brute force and DPLL.
    Verify(VerifyArgs),
    /// Run scaling measurements and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Faithful,
    Block,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Faithful => Mode::BigIntFaithful,
            ModeArg::Block => Mode::BlockOps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Dimacs,
    Inline,
}

/// `first`, `sorted` or `explicit:<name>,<name>,...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderArg {
    First,
    Sorted,
    Explicit(Vec<String>),
}

fn parse_order(s: &str) -> Result<OrderArg, String> {
    match s {
        "first" => Ok(OrderArg::First),
        "sorted" => Ok(OrderArg::Sorted),
        _ => match s.strip_prefix("explicit:") {
            Some(list) => Ok(OrderArg::Explicit(list.split(',').map(|n| n.trim().to_string()).collect())),
            None => Err("expected first, sorted or explicit:<list>".into()),
        },
    }
}

/// Inclusive `A..B`, or a single value.
fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("invalid number `{t}`"));
    match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty range {s}"));
            }
            Ok((a, b))
        }
        None => parse(s).map(|v| (v, v)),
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input file, or `-` for stdin.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub input_format: InputFormat,
    #[arg(long, value_enum, default_value = "block")]
    pub mode: ModeArg,
    #[arg(long, value_parser = parse_order, default_value = "first")]
    pub order: OrderArg,
    #[arg(long, value_enum, default_value = "lenient")]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = DEFAULT_MAX_WIDTH_BITS)]
    pub max_width_bits: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Build clause masks on all cores.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub limit: u64,
}

#[derive(Debug, Args)]
pub struct MasksArgs {
    #[arg(long = "v", default_value_t = 3)]
    pub vars: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory of CNF files; without it a random corpus is generated.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    /// Largest variable count in the generated corpus.
    #[arg(long, default_value_t = 10)]
    pub max_v: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "block")]
    pub mode: ModeArg,
    /// Brute force is skipped above this many variables; DPLL always runs.
    #[arg(long, default_value_t = 20)]
    pub brute_limit: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_WIDTH_BITS)]
    pub max_width_bits: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "v", value_parser = parse_range, default_value = "4..20")]
    pub vars: (usize, usize),
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub ratio: f64,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Timed solves per instance; the fastest is reported.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub timed_runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "block")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_MAX_WIDTH_BITS)]
    pub max_width_bits: u64,
    /// Print the model-fit verdict to stderr.
    #[arg(long)]
    pub fit: bool,
    /// Also write every generated instance as DIMACS into this directory.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// Runs the tool on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdin, stdout),
        Command::Model(a) => cmd_model(a, stdin, stdout),
        Command::Masks(a) => cmd_masks(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout, stderr),
        Command::Bench(a) => cmd_bench(a, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dialect {
    Dimacs,
    Inline,
}

/// DIMACS if every non-blank line is a comment, a header, `%`, or integers,
/// and at least one line is a header or integers.
fn looks_like_dimacs(text: &str) -> bool {
    let mut has_data = false;
    let conforms = text.lines().map(str::trim).filter(|l| !l.is_empty()).all(|l| {
        if l == "c" || l.starts_with("c ") || l.starts_with("c\t") || l.starts_with('%') {
            return true;
        }
        let data = l.starts_with("p ") || l.split_whitespace().all(|t| t.parse::<i64>().is_ok());
        has_data |= data;
        data
    });
    conforms && has_data
}

fn read_source(path: &Path, stdin: &mut dyn Read) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    if path == Path::new("-") {
        stdin.read_to_end(&mut bytes).context("reading stdin")?;
    } else {
        bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(bytes)
}

fn parse_source(bytes: &[u8], format: InputFormat) -> std::result::Result<(Formula, Dialect), cnf::CnfError> {
    let dialect = match format {
        InputFormat::Dimacs => Dialect::Dimacs,
        InputFormat::Inline => Dialect::Inline,
        InputFormat::Auto => match std::str::from_utf8(bytes) {
            Ok(text) if !looks_like_dimacs(text) => Dialect::Inline,
            _ => Dialect::Dimacs,
        },
    };
    let formula = match dialect {
        Dialect::Dimacs => cnf::parse_dimacs(bytes)?,
        Dialect::Inline => {
            let text = std::str::from_utf8(bytes).map_err(|_| cnf::CnfError::Parse {
                line: 1,
                column: 1,
                message: "input is not UTF-8".into(),
            })?;
            cnf::parse_inline(text)?
        }
    };
    Ok((formula, dialect))
}

fn prepare(formula: &Formula, order: &OrderArg, policy: PolicyArg) -> Result<Formula> {
    let policy = match policy {
        PolicyArg::Strict => Policy::Strict,
        PolicyArg::Lenient => Policy::Lenient,
    };
    let canonical = cnf::canonicalize(formula, policy)?;
    let scheme = match order {
        OrderArg::First => OrderScheme::FirstOccurrence,
        OrderArg::Sorted => OrderScheme::Sorted,
        OrderArg::Explicit(names) => OrderScheme::Explicit(
            names
                .iter()
                .map(|n| canonical.var_by_name(n).ok_or_else(|| anyhow!("unknown variable `{n}` in --order")))
                .collect::<Result<Vec<VarId>>>()?,
        ),
    };
    Ok(cnf::variable_order(&canonical, &scheme)?)
}

fn load(args: &InputArgs, stdin: &mut dyn Read) -> Result<(Formula, Dialect)> {
    let bytes = read_source(&args.input, stdin)?;
    let (raw, dialect) = parse_source(&bytes, args.input_format).with_context(|| args.input.display().to_string())?;
    Ok((prepare(&raw, &args.order, args.policy)?, dialect))
}

fn solve_options(args: &InputArgs, keep_field: bool) -> SolveOptions {
    SolveOptions {
        mode: args.mode.into(),
        max_width_bits: args.max_width_bits,
        keep_final_field: keep_field,
        count_ops: true,
        skip_absent_runs: false,
        parallel: args.parallel,
    }
}

fn decision_code(d: Decision) -> i32 {
    match d {
        Decision::Satisfiable => EXIT_SAT,
        Decision::Unsatisfiable => EXIT_UNSAT,
    }
}

pub fn cmd_solve(args: &SolveArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<i32> {
    let (formula, _) = load(&args.input, stdin)?;
    let report = maskset::decide(&formula, &solve_options(&args.input, false))?;
    match args.input.format {
        Format::Text => write_report_text(&report, out)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string(&report)?)?,
        Format::Csv => {
            writeln!(out, "decision,halted_at_clause,masks_built,bit_ops,words_touched,peak_field_bytes,wall_time_ns")?;
            let c = &report.counters;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                report.decision,
                report.halted_at_clause.map(|h| h.to_string()).unwrap_or_default(),
                c.masks_built,
                c.bit_ops,
                c.words_touched,
                report.peak_field_bytes,
                report.wall_time.as_nanos()
            )?;
        }
    }
    Ok(decision_code(report.decision))
}

fn write_report_text(report: &SolveReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", report.decision)?;
    writeln!(out, "c variables {}", report.var_count)?;
    writeln!(out, "c clauses {}", report.clause_count)?;
    writeln!(out, "c mode {:?}", report.mode)?;
    if let Some(h) = report.halted_at_clause {
        writeln!(out, "c halted_at_clause {h}")?;
    }
    let c = &report.counters;
    writeln!(out, "c masks_built {}", c.masks_built)?;
    writeln!(out, "c bit_ops {}", c.bit_ops)?;
    writeln!(out, "c words_touched {}", c.words_touched)?;
    writeln!(out, "c bigint_ops {}", c.bigint_ops)?;
    writeln!(out, "c peak_field_bytes {}", report.peak_field_bytes)?;
    writeln!(out, "c wall_time_ns {}", report.wall_time.as_nanos())?;
    Ok(())
}

/// Variables in natural name order, for printing.
fn display_order(formula: &Formula) -> Vec<usize> {
    let mut order: Vec<usize> = (0..formula.var_count).collect();
    order.sort_by(|&a, &b| natural_cmp(&formula.names[a], &formula.names[b]));
    order
}

fn render_model(formula: &Formula, model: &Assignment, dialect: Dialect, order: &[usize]) -> String {
    match dialect {
        Dialect::Inline => {
            order.iter().map(|&j| format!("{}={}", formula.names[j], model.0[j] as u8)).collect::<Vec<_>>().join(" ")
        }
        Dialect::Dimacs => {
            let lits: Vec<String> =
                order.iter().map(|&j| format!("{}{}", if model.0[j] { "" } else { "-" }, formula.names[j])).collect();
            format!("v {} 0", lits.join(" "))
        }
    }
}

#[derive(Serialize)]
struct ModelOutput<'a> {
    decision: Decision,
    models: Vec<serde_json::Map<String, serde_json::Value>>,
    report: &'a SolveReport,
}

pub fn cmd_model(args: &ModelArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<i32> {
    let (formula, dialect) = load(&args.input, stdin)?;
    let mut report = maskset::decide(&formula, &solve_options(&args.input, true))?;
    if report.decision == Decision::Unsatisfiable {
        writeln!(out, "{}", report.decision)?;
        return Ok(EXIT_UNSAT);
    }
    let limit = usize::try_from(args.limit).unwrap_or(usize::MAX);
    let models = maskset::extract_models(&report, &formula, Some(limit))?;
    for model in &models {
        if !oracle::evaluate(&formula, model)? {
            bail!("extracted assignment {:?} does not satisfy the formula", model.index());
        }
    }
    let order = display_order(&formula);
    match args.input.format {
        Format::Json => {
            report.final_field = None;
            let models = models
                .iter()
                .map(|m| order.iter().map(|&j| (formula.names[j].clone(), m.0[j].into())).collect())
                .collect();
            let output = ModelOutput { decision: report.decision, models, report: &report };
            writeln!(out, "{}", serde_json::to_string(&output)?)?;
        }
        Format::Csv => {
            writeln!(out, "{}", order.iter().map(|&j| formula.names[j].as_str()).collect::<Vec<_>>().join(","))?;
            for m in &models {
                let row: Vec<&str> = order.iter().map(|&j| if m.0[j] { "1" } else { "0" }).collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Format::Text => {
            writeln!(out, "{}", report.decision)?;
            for m in &models {
                writeln!(out, "{}", render_model(&formula, m, dialect, &order))?;
            }
        }
    }
    Ok(EXIT_SAT)
}

/// Both tables as tab-separated text. Columns run over assignments of the
/// letters from all true to all false.
pub fn render_tables(var_count: usize) -> Result<String> {
    let rows = maskset::table_rows(var_count)?;
    let columns: Vec<String> = (0..1usize << var_count)
        .map(|c| {
            let k = (1usize << var_count) - 1 - c;
            (0..var_count).map(|d| (k >> (var_count - 1 - d) & 1).to_string()).collect::<Vec<_>>().join(",")
        })
        .collect();
    let bits = |row: &[bool], flip: bool| -> String {
        row.iter().map(|&b| if b != flip { "1" } else { "0" }).collect::<Vec<_>>().join("\t")
    };
    let mut s = String::new();
    s.push_str(&format!("Table 1. Truth value of every nontrivial clause over {var_count} variables\n\n"));
    s.push_str(&format!("\t{}\n", columns.join("\t")));
    for row in &rows {
        s.push_str(&format!("{}\t{}\n", row.label, bits(&row.truth_row, false)));
    }
    s.push_str("\nTable 2. Clause masks: 1 marks an assignment that falsifies the clause\n\n");
    s.push_str(&format!("\t{}\tValue\n", columns.join("\t")));
    for row in &rows {
        s.push_str(&format!("{}\t{}\t{}\n", row.label, bits(&row.truth_row, true), row.mask_value));
    }
    Ok(s)
}

pub fn cmd_masks(args: &MasksArgs, out: &mut dyn Write) -> Result<i32> {
    match args.format {
        Format::Text => out.write_all(render_tables(args.vars)?.as_bytes())?,
        Format::Csv => {
            writeln!(out, "clause,truth_row,mask_value")?;
            for row in maskset::table_rows(args.vars)? {
                let truth: String = row.truth_row.iter().map(|&b| if b { '1' } else { '0' }).collect();
                writeln!(out, "{},{},{}", row.label, truth, row.mask_value)?;
            }
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = maskset::table_rows(args.vars)?
                .into_iter()
                .map(|r| serde_json::json!({ "clause": r.label, "truth_row": r.truth_row, "mask_value": r.mask_value }))
                .collect();
            writeln!(out, "{}", serde_json::to_string(&rows)?)?;
        }
    }
    Ok(EXIT_OK)
}

/// Agreement counts from [`verify_corpus`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifySummary {
    pub instances: usize,
    pub satisfiable: usize,
    pub agreements: usize,
    pub disagreements: Vec<String>,
}

/// Decides every instance with the mask engine, DPLL and (up to
/// `brute_limit` variables) brute force. Any differing decision, or a witness
/// that fails [`oracle::evaluate`], is a disagreement.
pub fn verify_corpus(corpus: &[(String, Formula)], opts: &SolveOptions, brute_limit: usize) -> Result<VerifySummary> {
    let mut summary = VerifySummary::default();
    for (name, formula) in corpus {
        let mask = maskset::decide(formula, opts)?.decision;
        let dpll = oracle::dpll(formula);
        let mut answers = vec![("dpll", dpll.decision)];
        let mut witnesses = vec![dpll.witness];
        if formula.var_count <= brute_limit {
            let brute = oracle::brute_force_with_limit(formula, brute_limit)?;
            answers.push(("brute_force", brute.decision));
            witnesses.push(brute.witness);
        }
        let mut problems: Vec<String> = answers
            .iter()
            .filter(|(_, d)| *d != mask)
            .map(|(who, d)| format!("{who} says {d}, mask engine says {mask}"))
            .collect();
        for w in witnesses.iter().flatten() {
            if !oracle::evaluate(formula, w)? {
                problems.push("oracle witness fails evaluation".into());
            }
        }
        summary.instances += 1;
        summary.satisfiable += mask.is_sat() as usize;
        if problems.is_empty() {
            summary.agreements += 1;
        } else {
            summary.disagreements.push(format!("{name}: {}", problems.join("; ")));
        }
    }
    Ok(summary)
}

fn read_corpus(dir: &Path) -> Result<Vec<(String, Formula)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading corpus {}", dir.display()))?;
    paths.retain(|p| p.is_file());
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let (raw, _) = parse_source(&bytes, InputFormat::Auto).with_context(|| path.display().to_string())?;
            let formula = cnf::canonicalize(&raw, Policy::Lenient).with_context(|| path.display().to_string())?;
            Ok((path.display().to_string(), formula))
        })
        .collect()
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let corpus = match &args.corpus {
        Some(dir) => read_corpus(dir)?,
        None => bench::random_corpus(args.seed, args.count, args.max_v)
            .into_iter()
            .enumerate()
            .map(|(i, f)| (format!("instance {i}"), f))
            .collect(),
    };
    let opts = SolveOptions {
        mode: args.mode.into(),
        max_width_bits: args.max_width_bits,
        count_ops: false,
        ..Default::default()
    };
    let summary = verify_corpus(&corpus, &opts, args.brute_limit)?;
    writeln!(out, "instances: {}", summary.instances)?;
    writeln!(out, "satisfiable: {}", summary.satisfiable)?;
    writeln!(out, "unsatisfiable: {}", summary.instances - summary.satisfiable)?;
    writeln!(out, "agreements: {}", summary.agreements)?;
    writeln!(out, "disagreements: {}", summary.disagreements.len())?;
    if summary.disagreements.is_empty() {
        return Ok(EXIT_OK);
    }
    for d in &summary.disagreements {
        writeln!(err, "disagreement: {d}")?;
    }
    writeln!(err, "error: {} disagreement(s)", summary.disagreements.len())?;
    Ok(EXIT_ERROR)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let config = ScalingConfig {
        v_min: args.vars.0,
        v_max: args.vars.1,
        ratio: args.ratio,
        k: args.k,
        reps: args.reps,
        timed_runs: args.timed_runs as usize,
        mode: args.mode.into(),
        seed: args.seed,
        max_width_bits: args.max_width_bits,
        threads: args.threads,
        dump_dir: args.dump_dir.clone(),
    };
    let records = bench::run_scaling(&config)?;
    match &args.output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            bench::write_csv(&records, file)?;
        }
        None => bench::write_csv(&records, &mut *out)?,
    }
    if args.fit {
        let report = bench::fit_report(&records)?;
        for (v, ratio) in &report.step_ratios {
            writeln!(err, "step v={v}->{}: x{ratio:.3}", v + 1)?;
        }
        writeln!(err, "{}", report.verdict)?;
    }
    Ok(EXIT_OK)
}
