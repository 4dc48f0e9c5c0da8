use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cogload::dsl::SourceProgram;
use cogload::kb::{parse_kb, recompute_levels, validate_kb, KbError};
use cogload::propgen::{check_determinism, check_monotonicity, check_structured};
use cogload::report::{build_report, compare, error_json, ocg_to_dot, report_json, report_text, to_dot, Renderable};
use cogload::{analyze, GrowthFunction, PipelineError, SchemaKnowledgeBase};

#[derive(Parser)]
#[command(name = "cogload", version, about = "Cognitive complexity of structured algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Cfg,
    Flat,
    Ocg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Property {
    Monotonicity,
    Determinism,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Score a program against a knowledge base.
    Score {
        program: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value = "exp")]
        growth: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one pipeline stage as DOT.
    Graph {
        program: PathBuf,
        #[arg(long, value_enum)]
        stage: Stage,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate programs against knowledge bases.
    Compare {
        #[arg(required = true)]
        programs: Vec<PathBuf>,
        #[arg(long, required = true)]
        kb: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value = "exp")]
        growth: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded property check.
    Check {
        #[arg(value_enum)]
        property: Property,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        /// Where to write a counterexample on failure.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a knowledge base file.
    ValidateKb { kb: PathBuf },
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Analysis(e.to_string())
    }
}

fn color(code: &str, text: &str) -> String {
    let enabled = std::env::var_os("COGLOAD_NO_COLOR").is_none() && std::io::stderr().is_terminal();
    if enabled {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn read_program(path: &Path) -> Result<SourceProgram, Failure> {
    SourceProgram::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_kb(path: &Path) -> Result<SchemaKnowledgeBase, Failure> {
    match cogload::load_kb(path) {
        Ok(kb) => Ok(kb),
        Err(KbError::Io { path, message }) => Err(Failure::Usage(format!("{path}: {message}"))),
        Err(e) => Err(Failure::Analysis(format!("{}: {e}", path.display()))),
    }
}

fn growth(name: &str) -> Result<GrowthFunction, Failure> {
    name.parse().map_err(|e| {
        let known: Vec<&str> = GrowthFunction::ALL.iter().map(|g| g.name()).collect();
        Failure::Usage(format!("{e}; known: {}", known.join(", ")))
    })
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn score(program: &Path, kb: &Path, format: Format, growth_name: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    let g = growth(growth_name)?;
    let src = read_program(program)?;
    let kb = read_kb(kb)?;
    let analysis = match analyze(&src.text, &kb) {
        Ok(a) => a,
        Err(e) => {
            if format == Format::Json {
                emit(&error_json(&e), out)?;
            }
            return Err(Failure::Analysis(format!("{}: {e}", program.display())));
        }
    };
    let text = match format {
        Format::Dot => ocg_to_dot(&analysis.ocg),
        Format::Json => report_json(&build_report(&src.name(), &analysis.ocg, g)?),
        Format::Text => report_text(&build_report(&src.name(), &analysis.ocg, g)?),
    };
    emit(&text, out)
}

fn graph(program: &Path, stage: Stage, kb: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<(), Failure> {
    let src = read_program(program)?;
    let kb = match (stage, kb) {
        (Stage::Ocg, None) => return Err(Failure::Usage("--stage ocg requires --kb".into())),
        (_, Some(path)) => Some(read_kb(path)?),
        (_, None) => None,
    };
    let ast = cogload::dsl::parse_program(&src.text).map_err(PipelineError::from)?;
    let (cfg, flat) = cogload::front_end(&ast)?;
    let text = match (stage, kb) {
        (Stage::Cfg, _) => to_dot(Renderable::Cfg(&cfg)),
        (Stage::Flat, _) => to_dot(Renderable::Graph(&flat)),
        (Stage::Ocg, Some(kb)) => to_dot(Renderable::Ocg(&cogload::analyze_ast(ast, &kb)?.ocg)),
        (Stage::Ocg, None) => unreachable!(),
    };
    emit(&text, out)
}

fn compare_cmd(
    programs: &[PathBuf],
    kbs: &[PathBuf],
    format: Format,
    growth_name: &str,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let g = growth(growth_name)?;
    let sources = programs.iter().map(|p| read_program(p)).collect::<Result<Vec<_>, _>>()?;
    let kbs = kbs.iter().map(|k| read_kb(k)).collect::<Result<Vec<_>, _>>()?;
    let mut reports = Vec::new();
    for (src, path) in sources.iter().zip(programs) {
        for kb in &kbs {
            let a = analyze(&src.text, kb).map_err(|e| Failure::Analysis(format!("{}: {e}", path.display())))?;
            reports.push(build_report(&src.name(), &a.ocg, g)?);
        }
    }
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
        Format::Text => compare(&reports),
        Format::Dot => return Err(Failure::Usage("compare supports text and json".into())),
    };
    emit(&text, out)
}

fn check(property: Property, seed: u64, iterations: usize, out: &Option<PathBuf>) -> Result<(), Failure> {
    let report = match property {
        Property::Monotonicity => check_monotonicity(seed, iterations),
        Property::Determinism => check_determinism(seed, iterations),
        Property::Structured => check_structured(seed, iterations),
    };
    if report.passed() {
        println!("{} {}: {} iterations, seed {seed}", color("32", "ok"), report.property, iterations);
        return Ok(());
    }
    let path = out
        .clone()
        .unwrap_or_else(|| std::env::temp_dir().join(format!("cogload-{}-{seed}.json", report.property)));
    let body = serde_json::to_string_pretty(&report.counterexample()).expect("counterexample serializes") + "\n";
    std::fs::write(&path, body).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    println!("{}", path.display());
    Err(Failure::Analysis(format!(
        "{}: {} of {iterations} iterations failed; counterexample written to {}",
        report.property,
        report.failures.len(),
        path.display()
    )))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let kb = parse_kb(&text).map_err(|e| Failure::Analysis(format!("{}:{e}", path.display())))?;
    let diags = validate_kb(&kb);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        return Err(Failure::Analysis(lines.join("\n")));
    }
    let kb = recompute_levels(&kb);
    println!("{}: {} schemas", kb.name, kb.schemas().len());
    for s in kb.schemas() {
        println!("  level {}  {}", s.level, s.signature());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Score { program, kb, format, growth, out } => score(program, kb, *format, growth, out),
        Command::Graph { program, stage, kb, out } => graph(program, *stage, kb, out),
        Command::Compare { programs, kb, format, growth, out } => compare_cmd(programs, kb, *format, growth, out),
        Command::Check { property, seed, iterations, out } => check(*property, *seed, *iterations, out),
        Command::ValidateKb { kb } => validate(kb),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("{} {msg}", color("31", "error:"));
            ExitCode::from(2)
        }
        Err(Failure::Analysis(msg)) => {
            eprintln!("{} {msg}", color("31", "error:"));
            ExitCode::from(1)
        }
    }
}
