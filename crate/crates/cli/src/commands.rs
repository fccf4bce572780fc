use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::json;

use emt_core::canon::{canonicalize, difference};
use emt_core::dsl::{expand_defs, parse, render, Format, Program};
use emt_core::expr::json::parse_rational;
use emt_core::hilbert::report::discrepancy_report;
use emt_core::hilbert::{hilbert_stages, HilbertOptions};
use emt_core::variational::{noether_emt, program_rules, rules_with_defaults};
use emt_core::verify::oracle::{oracle_equal, OracleOptions};
use emt_core::verify::props::{check_property, CheckContext, Property};
use emt_core::{Dim, Error, Rational, Registry, Sym, TensorExpr};

use crate::{Cli, Command, Common, Derive, DeriveArgs, OracleArgs, EXIT_DIFFERENT, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(PathBuf, std::io::Error),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(..) => EXIT_USAGE,
            CliError::Core(Error::IndexCollision(_)) => EXIT_INTERNAL,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| CliError::Io(p.to_path_buf(), e)),
        None => {
            use std::io::Write;
            // a closed downstream pipe is not an error
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(PathBuf::from("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn load_program(path: &Path) -> Result<Program> {
    Ok(parse(&read(path)?)?)
}

fn extension(path: &Path) -> &str {
    path.extension().and_then(|s| s.to_str()).unwrap_or("")
}

/// Declarations for reading expressions: from `--lag`, else none.
struct Context {
    program: Option<Program>,
}

impl Context {
    fn new(lag: Option<&Path>) -> Result<Self> {
        Ok(Context { program: lag.map(load_program).transpose()? })
    }

    fn registry(&self) -> Registry {
        match &self.program {
            Some(p) => p.registry(),
            None => Registry::standard(),
        }
    }

    /// `.json` expression files, `.lag` programs (their Lagrangian) and
    /// expression source read against the `--lag` declarations.
    fn load(&self, path: &Path) -> Result<TensorExpr> {
        let text = read(path)?;
        match extension(path) {
            "json" => Ok(TensorExpr::from_json(&text)?),
            "lag" => Ok(expand_defs(&parse(&text)?)?),
            _ => match &self.program {
                Some(p) => Ok(p.parse_expr(&text)?),
                None => Err(CliError::Usage(format!("{}: expression source needs --lag for its declarations", path.display()))),
            },
        }
    }
}

pub fn parse_dim(s: &str) -> Result<Dim> {
    match s.trim() {
        "D" => Ok(Dim::Symbolic),
        n => match n.parse::<u32>() {
            Ok(n) if n > 0 => Ok(Dim::Fixed(n)),
            _ => Err(CliError::Usage(format!("--dim must be a positive integer or `D`, got {s:?}"))),
        },
    }
}

fn at_dim(e: &TensorExpr, dim: Dim, reg: &Registry) -> Result<TensorExpr> {
    let e = match dim {
        Dim::Fixed(n) => e.fix_dim(n),
        Dim::Symbolic => e.clone().with_dim(Dim::Symbolic),
    };
    Ok(canonicalize(&e, reg)?)
}

fn parameter_values(p: &Program, set: &[String]) -> Result<BTreeMap<Sym, Rational>> {
    let mut out = BTreeMap::new();
    for s in set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects NAME=VALUE, got {s:?}")))?;
        let k = Sym::from(k.trim());
        if !p.params.contains(&k) {
            return Err(CliError::Usage(format!("`{k}` is not a declared parameter")));
        }
        out.insert(k, parse_rational(v.trim())?);
    }
    Ok(out)
}

fn finish_derived(t: &TensorExpr, p: &Program, args: &DeriveArgs) -> Result<u8> {
    let reg = p.registry();
    let t = t.substitute_params(&parameter_values(p, &args.set)?);
    let t = at_dim(&t, parse_dim(&args.common.dim)?, &reg)?;
    write_out(args.output.as_deref(), &t.to_json())?;
    Ok(EXIT_OK)
}

fn oracle_options(o: &OracleArgs) -> OracleOptions {
    OracleOptions { trials: o.trials, seed: o.seed, degree: o.degree }
}

fn canon(file: &Path, json: bool, common: &Common) -> Result<u8> {
    let ctx = Context::new(common.lag.as_deref())?;
    let (e, reg) = if extension(file) == "lag" {
        let p = load_program(file)?;
        (expand_defs(&p)?, p.registry())
    } else {
        (ctx.load(file)?, ctx.registry())
    };
    let c = at_dim(&e, parse_dim(&common.dim)?, &reg)?;
    let text = if json { c.to_json() } else { render(&c, Format::Dsl) };
    write_out(None, &text)?;
    Ok(EXIT_OK)
}

fn derive(d: &Derive) -> Result<u8> {
    match d {
        Derive::Noether { file, delta, derive } => {
            let mut p = load_program(file)?;
            if let Some(path) = delta {
                p = p.extend(&read(path)?)?;
            }
            let reg = p.registry();
            let l = expand_defs(&p)?;
            let rules = rules_with_defaults(&l, &program_rules(&p)?, &reg)?;
            finish_derived(&noether_emt(&l, &rules, &reg)?, &p, derive)
        }
        Derive::Hilbert { file, emit_stage, stage_dir, exact, derive } => {
            let p = load_program(file)?;
            let opts = if *exact { HilbertOptions::exact() } else { HilbertOptions::default() };
            let stages = hilbert_stages(&p, opts)?;
            let dir = stage_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("emt");
            for s in emit_stage {
                let path = dir.join(format!("{stem}.{}.json", s.name()));
                let body = json!({ "stage": s.name(), "expr": stages.get(*s).to_json_value() });
                write_out(Some(&path), &pretty(&body))?;
            }
            finish_derived(&stages.flat, &p, derive)
        }
    }
}

fn diff(a: &Path, b: &Path, common: &Common) -> Result<u8> {
    let ctx = Context::new(common.lag.as_deref())?;
    let reg = ctx.registry();
    let dim = parse_dim(&common.dim)?;
    let (x, y) = (at_dim(&ctx.load(a)?, dim, &reg)?, at_dim(&ctx.load(b)?, dim, &reg)?);
    let d = difference(&x, &y, &reg)?;
    let body = json!({
        "equal": d.is_zero(),
        "terms": d.len(),
        "difference": d.to_json_value(),
        "text": render(&d, Format::Dsl),
    });
    write_out(None, &pretty(&body))?;
    Ok(if d.is_zero() { EXIT_OK } else { EXIT_DIFFERENT })
}

fn check(file: &Path, emt: &Path, properties: &[String], mode: crate::ModeArg, oracle: &OracleArgs, common: &Common) -> Result<u8> {
    let p = load_program(file)?;
    let props = properties.iter().map(|s| Property::parse(s)).collect::<emt_core::Result<Vec<_>>>()?;
    let ctx = Context { program: Some(p.clone()) };
    let mut c = CheckContext::new(p.registry());
    c.dim = parse_dim(&common.dim)?;
    c.mode = mode.into();
    c.oracle = oracle_options(oracle);
    c.gauge_rule = p.gauge_rules()?.into_iter().next();
    let t = ctx.load(emt)?;
    let mut reports = Vec::new();
    for prop in props {
        reports.push(check_property(&t, prop, &c)?);
    }
    let passed = reports.iter().all(|r| r.passed());
    let body = json!({ "passed": passed, "reports": reports });
    write_out(None, &pretty(&body))?;
    Ok(if passed { EXIT_OK } else { EXIT_DIFFERENT })
}

fn oracle_compare(a: &Path, b: &Path, oracle: &OracleArgs, lag: Option<&Path>) -> Result<u8> {
    let ctx = Context::new(lag)?;
    let reg = ctx.registry();
    let r = oracle_equal(&ctx.load(a)?, &ctx.load(b)?, &reg, &oracle_options(oracle))?;
    write_out(None, &r.to_json())?;
    Ok(if r.is_equal() { EXIT_OK } else { EXIT_DIFFERENT })
}

fn report(oracle: &OracleArgs, output: Option<&Path>) -> Result<u8> {
    let r = discrepancy_report(&oracle_options(oracle))?;
    let text = serde_json::to_string_pretty(&r).expect("report serializes");
    write_out(output, &text)?;
    Ok(if r.leading_coefficients_exact && r.certified { EXIT_OK } else { EXIT_DIFFERENT })
}

pub fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Canon { file, json, common } => canon(file, *json, common),
        Command::Derive(d) => derive(d),
        Command::Diff { a, b, common } => diff(a, b, common),
        Command::Check { file, emt, properties, mode, oracle, common } => {
            check(file, emt, properties, *mode, oracle, common)
        }
        Command::OracleCompare { a, b, oracle, lag } => oracle_compare(a, b, oracle, lag.as_deref()),
        Command::Report { oracle, output } => report(oracle, output.as_deref()),
    }
}
