use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use structsheet::refactor::{self, Direction, RefactorOp};
use structsheet::soundness::{self, SoundnessReport};
use structsheet::{evaluate, infer, CellAddress, StructureModel, Workbook};
use structsheet_service::views::{line_number, split_point, values_json};
use structsheet_service::{load_path, port_from_env, save_path, ApiError, Format};

mod grid;

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_OPERATION: u8 = 3;

#[derive(Parser)]
#[command(name = "structsheet", version, about = "Structure-aware spreadsheet analysis, checking and refactoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Workbook file (`.wbk.json` or `.csv`).
    file: PathBuf,
    /// Input format; detected from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Native,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Split,
    Extend,
    Shrink,
    Move,
}

#[derive(Subcommand)]
enum Command {
    /// Print the inferred formula and reference groups.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
    },
    /// Report structural violations; exits 1 when there are any.
    Check {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        json: bool,
    },
    /// Apply repair candidates and write the result.
    Repair {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        /// Choose candidates and answer prompts on stdin.
        #[arg(long, conflicts_with = "auto")]
        interactive: bool,
        /// Apply the best candidate for each violation until clean (default).
        #[arg(long)]
        auto: bool,
    },
    /// Plan, and unless --dry-run apply, a structural refactoring.
    Refactor {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        op: OpArg,
        /// Group id or exact range (`D2:D8`).
        #[arg(long)]
        group: String,
        /// Split point: subexpression text (`B+C`) or child path (`0.1`).
        #[arg(long)]
        at: Option<String>,
        /// Helper column (`E`) or row for a split.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 1)]
        count: u32,
        #[arg(long, default_value = "down")]
        direction: String,
        /// Let extend write over non-empty cells.
        #[arg(long)]
        overwrite: bool,
        /// Destination top-left cell for a move.
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        dry_run: bool,
        #[arg(long, required_unless_present = "dry_run")]
        out: Option<PathBuf>,
    },
    /// Print evaluated values.
    Eval {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        cell: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

/// A failure with its exit code.
struct Failure(u8, String);

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure(EXIT_USAGE, e.to_string())
    }

    fn operation(e: impl std::fmt::Display) -> Self {
        Failure(EXIT_OPERATION, e.to_string())
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(EXIT_USAGE, e.message)
    }
}

fn load(input: &Input) -> Result<Workbook, Failure> {
    Ok(load_path(&input.file, input.format.map(Format::from))?)
}

fn model_of(wb: &Workbook) -> Result<StructureModel, Failure> {
    infer(wb).map_err(Failure::operation)
}

fn write_out(wb: &Workbook, out: &Path) -> Result<(), Failure> {
    Ok(save_path(wb, out, None)?)
}

fn print_json(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn analyze(input: &Input, json: bool) -> Result<u8, Failure> {
    let wb = load(input)?;
    let model = model_of(&wb)?;
    if json {
        print_json(&model.to_json());
        return Ok(0);
    }
    print!("{}", model.to_text());
    if !model.ref_groups.is_empty() {
        println!();
        println!("reference groups:");
        for rg in &model.ref_groups {
            let owner = &model.groups[rg.owner];
            println!(
                "  {}  slot {}  {}{}",
                model.render_range(&owner.sheet, owner.range),
                rg.slot.index,
                model.render_range(&owner.sheet, rg.range),
                if rg.fragmented { "  (fragmented)" } else { "" }
            );
        }
    }
    Ok(0)
}

fn print_report(wb: &Workbook, model: &StructureModel, report: &SoundnessReport) {
    if report.is_clean() {
        println!("clean");
    } else {
        for v in &report.violations {
            println!("{}  {}  {}  {}", v.id, v.kind.as_str(), v.focus.render(wb.default_sheet()), v.message);
            for c in report.candidates.get(&v.id).into_iter().flatten() {
                println!("    {}{}", c.description, if c.requires_input.is_some() { "  [needs input]" } else { "" });
            }
        }
    }
    println!();
    print!("{}", grid::render(wb, model, report));
}

fn check(input: &Input, json: bool) -> Result<u8, Failure> {
    let wb = load(input)?;
    let model = model_of(&wb)?;
    let report = soundness::check(&wb, &model);
    if json {
        print_json(&report.to_json());
    } else {
        print_report(&wb, &model, &report);
    }
    Ok(if report.is_clean() { 0 } else { EXIT_VIOLATIONS })
}

fn prompt(line: &str) -> Option<String> {
    print!("{line}");
    std::io::stdout().flush().ok();
    let mut answer = String::new();
    match std::io::stdin().lock().read_line(&mut answer) {
        Ok(0) | Err(_) => None,
        Ok(_) => Some(answer.trim().to_string()),
    }
}

/// Walks the violations, asking which candidate to apply for each.
fn repair_interactive(wb: &mut Workbook) -> Result<SoundnessReport, Failure> {
    let mut report = soundness::check(wb, &model_of(wb)?);
    let mut skipped = Vec::new();
    loop {
        let Some(v) = report.violations.iter().find(|v| !skipped.contains(&(v.kind, v.focus.clone()))) else {
            return Ok(report);
        };
        println!("{}  {}  {}", v.kind.as_str(), v.focus.render(wb.default_sheet()), v.message);
        let cands = report.candidates.get(&v.id).cloned().unwrap_or_default();
        for (i, c) in cands.iter().enumerate() {
            println!("  [{}] {}", i + 1, c.description);
        }
        let Some(choice) = prompt("choose a candidate (empty to skip): ") else {
            return Ok(report);
        };
        let picked = choice.parse::<usize>().ok().and_then(|n| n.checked_sub(1)).and_then(|n| cands.get(n));
        let Some(cand) = picked else {
            skipped.push((v.kind, v.focus.clone()));
            continue;
        };
        let input = match &cand.requires_input {
            Some(p) => match prompt(&format!("{}: ", p.prompt)) {
                Some(a) => Some(a),
                None => return Ok(report),
            },
            None => None,
        };
        match soundness::apply_candidate(wb, &report, cand, input.as_deref()) {
            Ok((_, _, next)) => report = next,
            Err(e) => eprintln!("not applied: {e}"),
        }
    }
}

fn repair(input: &Input, out: &Path, interactive: bool) -> Result<u8, Failure> {
    let mut wb = load(input)?;
    let report = if interactive {
        repair_interactive(&mut wb)?
    } else {
        let outcome = soundness::repair(&mut wb, |_, _| None).map_err(Failure::operation)?;
        for a in &outcome.applied {
            println!("applied: {a}");
        }
        outcome.report
    };
    write_out(&wb, out)?;
    if report.is_clean() {
        println!("clean");
        Ok(0)
    } else {
        println!("{} violation(s) remain", report.violations.len());
        Ok(EXIT_VIOLATIONS)
    }
}

#[allow(clippy::too_many_arguments)]
fn refactor_cmd(
    input: &Input,
    op: OpArg,
    group: String,
    at: Option<String>,
    target: Option<String>,
    count: u32,
    direction: &str,
    overwrite: bool,
    to: Option<String>,
    dry_run: bool,
    out: Option<PathBuf>,
) -> Result<u8, Failure> {
    let mut wb = load(input)?;
    let model = model_of(&wb)?;
    let direction = Direction::parse(direction).ok_or_else(|| Failure::usage(format!("unknown direction `{direction}`")))?;
    let op = match op {
        OpArg::Split => {
            let at = at.ok_or_else(|| Failure::usage("--op split needs --at"))?;
            let target = match target {
                None => None,
                Some(t) => Some(line_number(&t).ok_or_else(|| Failure::usage(format!("bad --target `{t}`")))?),
            };
            RefactorOp::Split { group, at: split_point(&at), target }
        }
        OpArg::Extend => RefactorOp::Extend { group, count, direction, overwrite },
        OpArg::Shrink => RefactorOp::Shrink { group, count, direction },
        OpArg::Move => {
            let to = to.ok_or_else(|| Failure::usage("--op move needs --to"))?;
            let to = CellAddress::parse(&to, wb.default_sheet()).map_err(Failure::usage)?.pos;
            RefactorOp::Move { group, to }
        }
    };
    let plan = refactor::plan(&wb, &model, &op).map_err(Failure::operation)?;
    let mut doc = plan.to_json();
    doc["applied"] = json!(!dry_run);
    if !dry_run {
        refactor::apply_plan(&mut wb, &plan).map_err(Failure::operation)?;
        write_out(&wb, out.as_deref().expect("clap requires --out"))?;
    }
    print_json(&doc);
    Ok(0)
}

fn eval_cmd(input: &Input, cell: Option<&str>, json: bool) -> Result<u8, Failure> {
    let wb = load(input)?;
    let values = evaluate(&wb);
    let sheet = wb.default_sheet();
    if let Some(a) = cell {
        let addr = CellAddress::parse(a, sheet).map_err(Failure::usage)?;
        let v = values.get(&addr).cloned().unwrap_or(structsheet::CellValue::Blank);
        if json {
            print_json(&v.to_json());
        } else {
            println!("{v}");
        }
    } else if json {
        print_json(&values_json(&values, sheet));
    } else {
        for (a, v) in &values {
            println!("{}\t{v}", a.render(sheet));
        }
    }
    Ok(0)
}

fn serve(port: Option<u16>) -> Result<u8, Failure> {
    let port = port.unwrap_or_else(port_from_env);
    let rt = tokio::runtime::Runtime::new().map_err(Failure::usage)?;
    eprintln!("listening on port {port}");
    rt.block_on(structsheet_service::serve(port)).map_err(Failure::usage)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Analyze { input, json, text: _ } => analyze(&input, json),
        Command::Check { input, json } => check(&input, json),
        Command::Repair { input, out, interactive, auto: _ } => repair(&input, &out, interactive),
        Command::Refactor { input, op, group, at, target, count, direction, overwrite, to, dry_run, out } => {
            refactor_cmd(&input, op, group, at, target, count, &direction, overwrite, to, dry_run, out)
        }
        Command::Eval { input, cell, json } => eval_cmd(&input, cell.as_deref(), json),
        Command::Serve { port } => serve(port),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
