//! The command-line driver: parse, resolve imports, analyze, evaluate.
//!
//! Diagnostics go to the error stream as `<file>:<line>: <severity>: <message>`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use oraclelog_core::parser::{parse_program_with_notes, validate_arities};
use oraclelog_core::{
    analyze_program, AnalysisOptions, Bindings, Engine, EvalError, EvalOptions, EvalWarning, GroundingLimits,
    ImportWarning, Program, Registry,
};

use crate::search::{SearchPath, ENV_VAR};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROGRAM_ERROR: i32 = 1;
pub const EXIT_CONSTRAINT: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Print the perfect model, one atom per line.
    #[default]
    Model,
    /// Print the ground program with external atoms removed.
    Ground,
    /// Print the safety report without evaluating.
    Check,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliConfig {
    pub input_files: Vec<PathBuf>,
    pub search_path: SearchPath,
    pub mode: Mode,
    pub limits: GroundingLimits,
    pub keep_external: bool,
    pub allow_unsafe_recursion: bool,
    pub list_builtins: bool,
}

impl CliConfig {
    pub fn new(input_files: Vec<PathBuf>) -> Self {
        CliConfig {
            input_files,
            search_path: SearchPath::default(),
            mode: Mode::Model,
            limits: GroundingLimits::default(),
            keep_external: false,
            allow_unsafe_recursion: false,
            list_builtins: false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "oraclelog",
    version,
    about = "Evaluate logic programs with externally computed predicates"
)]
struct Args {
    /// Program files; their rules are merged in order.
    #[arg(required_unless_present = "list_builtins")]
    files: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = Mode::Model)]
    mode: Mode,

    /// `;`-separated directories searched for package manifests.
    #[arg(long, value_name = "DIRS")]
    path: Option<String>,

    /// Maximum fixpoint rounds.
    #[arg(long, value_name = "N", default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: u64,

    /// Maximum constants invented by oracles.
    #[arg(long, value_name = "N", default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_constants: u64,

    /// Keep satisfied external atoms in ground rules.
    #[arg(long)]
    keep_external: bool,

    /// Evaluate recursive rules that are only weakly safe.
    #[arg(long)]
    allow_unsafe_recursion: bool,

    /// List the active external predicates and exit.
    #[arg(long)]
    list_builtins: bool,
}

/// Exit status and the text written to each stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Builds a configuration from `argv` (program name first). `-path` is
/// accepted for `--path`; `env_path` is prepended to the search path.
pub fn parse_args<I, T>(argv: I, env_path: Option<&str>) -> Result<CliConfig, Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = argv.into_iter().map(|a| {
        let a: OsString = a.into();
        match a.to_str() {
            Some("-path") => OsString::from("--path"),
            Some(s) if s.starts_with("-path=") => OsString::from(format!("-{s}")),
            _ => a,
        }
    });
    let args = Args::try_parse_from(argv).map_err(|e| {
        let text = e.render().to_string();
        if e.use_stderr() {
            Outcome {
                status: EXIT_PROGRAM_ERROR,
                stdout: String::new(),
                stderr: text,
            }
        } else {
            Outcome {
                status: EXIT_OK,
                stdout: text,
                stderr: String::new(),
            }
        }
    })?;
    Ok(CliConfig {
        input_files: args.files,
        search_path: SearchPath::resolve(args.path.as_deref(), env_path),
        mode: args.mode,
        limits: GroundingLimits {
            max_iterations: usize::try_from(args.max_steps).unwrap_or(usize::MAX),
            max_new_constants: usize::try_from(args.max_constants).unwrap_or(usize::MAX),
        },
        keep_external: args.keep_external,
        allow_unsafe_recursion: args.allow_unsafe_recursion,
        list_builtins: args.list_builtins,
    })
}

/// Parses the process arguments and environment.
pub fn config_from_env() -> Result<CliConfig, Outcome> {
    let env = std::env::var(ENV_VAR).ok();
    parse_args(std::env::args_os(), env.as_deref())
}

/// One line per active external predicate, base pattern starred.
pub fn list_builtins(bindings: &Bindings) -> String {
    bindings.listing()
}

type Location = (String, usize);

#[derive(Default)]
struct Diagnostics {
    text: String,
    errors: usize,
}

impl Diagnostics {
    fn emit(&mut self, (file, line): &Location, severity: &str, message: impl std::fmt::Display) {
        if severity == "error" {
            self.errors += 1;
        }
        let _ = writeln!(self.text, "{file}:{line}: {severity}: {message}");
    }
}

struct Sources {
    program: Program,
    rules: Vec<Location>,
    imports: Vec<Location>,
}

fn load(files: &[PathBuf], diags: &mut Diagnostics) -> Option<Sources> {
    let mut units = Vec::new();
    let mut rules = Vec::new();
    let mut imports = Vec::new();
    for path in files {
        let name = path.display().to_string();
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                diags.emit(&(name, 0), "error", format!("cannot read file: {e}"));
                continue;
            }
        };
        match parse_program_with_notes(&text) {
            Ok(parsed) => {
                for note in &parsed.notes {
                    diags.emit(&(name.clone(), note.line), "warning", &note.message);
                }
                rules.extend(parsed.rule_lines.iter().map(|&l| (name.clone(), l)));
                imports.extend(parsed.import_lines.iter().map(|&l| (name.clone(), l)));
                units.push(parsed.program);
            }
            Err(e) => diags.emit(
                &(name, e.line),
                "error",
                format!("column {}: {}", e.column, e.kind),
            ),
        }
    }
    if diags.errors > 0 {
        return None;
    }
    let program = Program::merge(units);
    if let Err((index, kind)) = validate_arities(&program.rules) {
        diags.emit(&rules[index], "error", kind);
        return None;
    }
    Some(Sources {
        program,
        rules,
        imports,
    })
}

/// Runs the whole pipeline against `registry`.
pub fn run(config: &CliConfig, registry: &Registry) -> Outcome {
    let mut diags = Diagnostics::default();
    let mut out = Outcome::default();
    let status = pipeline(config, registry, &mut diags, &mut out.stdout);
    out.status = status;
    out.stderr = diags.text;
    out
}

fn pipeline(config: &CliConfig, registry: &Registry, diags: &mut Diagnostics, stdout: &mut String) -> i32 {
    let Some(src) = load(&config.input_files, diags) else {
        return EXIT_PROGRAM_ERROR;
    };

    let resolution = match registry.resolve_imports(&src.program.imports, &config.search_path) {
        Ok(r) => r,
        Err(e) => {
            diags.emit(&src.imports[e.directive()], "error", e);
            return EXIT_PROGRAM_ERROR;
        }
    };
    for w in &resolution.warnings {
        let ImportWarning::PredicateShadowed { directive, .. } = w;
        diags.emit(&src.imports[*directive], "warning", w);
    }
    let bindings = resolution.bindings;

    if config.list_builtins {
        stdout.push_str(&list_builtins(&bindings));
        return EXIT_OK;
    }

    let options = AnalysisOptions {
        allow_unsafe_recursion: config.allow_unsafe_recursion,
    };
    let analysis = analyze_program(&src.program, &bindings, options);
    let report = match &analysis {
        Ok(a) => &a.report,
        Err(e) => &e.report,
    };
    for (i, r) in report.rules.iter().enumerate() {
        if r.waived.is_some() {
            diags.emit(&src.rules[i], "warning", report.render_line(i));
        } else if !r.verdict.is_safe() {
            diags.emit(&src.rules[i], "error", report.render_line(i));
        }
    }
    if config.mode == Mode::Check {
        stdout.push_str(&report.to_string());
        return if report.all_safe() {
            EXIT_OK
        } else {
            EXIT_PROGRAM_ERROR
        };
    }
    let Ok(analysis) = analysis else {
        return EXIT_PROGRAM_ERROR;
    };

    let eval_options = EvalOptions {
        limits: config.limits,
        keep_external: config.keep_external,
        allow_unsafe_recursion: config.allow_unsafe_recursion,
        ..EvalOptions::default()
    };
    let mut engine = Engine::new(&bindings);
    match engine.evaluate_analyzed(&src.program, &analysis, eval_options) {
        Ok(ev) => {
            for w in &ev.warnings {
                let EvalWarning::NearLimit { rule, .. } = w;
                let at = rule.map_or_else(|| (src_file(config), 0), |r| src.rules[r].clone());
                diags.emit(&at, "warning", w);
            }
            match config.mode {
                Mode::Model => stdout.push_str(&ev.render_model()),
                Mode::Ground => stdout.push_str(&ev.render_ground_program()),
                Mode::Check => unreachable!("handled above"),
            }
            EXIT_OK
        }
        Err(e) => {
            let at = match &e {
                EvalError::NotStratifiable(ns) => src
                    .program
                    .rules
                    .iter()
                    .position(|r| {
                        r.head
                            .as_ref()
                            .is_some_and(|h| ns.predicates.contains(&h.predicate))
                    })
                    .map(|i| src.rules[i].clone()),
                other => other.rule().map(|i| src.rules[i].clone()),
            }
            .unwrap_or_else(|| (src_file(config), 0));
            diags.emit(&at, "error", &e);
            match e {
                EvalError::ConstraintViolation { .. } => EXIT_CONSTRAINT,
                EvalError::LimitExceeded { .. } | EvalError::OracleFailure { .. } => EXIT_LIMIT,
                EvalError::Unsafe(_) | EvalError::NotStratifiable(_) => EXIT_PROGRAM_ERROR,
            }
        }
    }
}

fn src_file(config: &CliConfig) -> String {
    config
        .input_files
        .first()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}
