use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde_json::json;
use weblin::calculus::{parse_number, Domain, WebSpec};
use weblin::corpus::{case, cases, linear_five_web};
use weblin::expr::parse;
use weblin::invariants::{check_dweb, WebCheck, WebVerdict, ZeroTestPolicy};
use weblin::linearizer::straight::foliations;
use weblin::linearizer::{linearize as run_pipeline, svg, LinearizeError, LinearizeOptions};
use weblin::report::{evidence_table, invariant_summary, linearization_table, Report};

use crate::RunArgs;

pub const EXIT_USAGE: u8 = 3;
const EXIT_INPUT: u8 = 4;
const EXIT_FAILED: u8 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn verdict_code(v: WebVerdict) -> u8 {
    match v {
        WebVerdict::Yes => 0,
        WebVerdict::No => 1,
        WebVerdict::Inconclusive => 2,
    }
}

fn parse_function(flag: &str, text: &str) -> Result<weblin::expr::Expr, CliError> {
    parse(text).map_err(|e| {
        let caret = " ".repeat(e.offset);
        CliError::Input(format!("--{flag} {text:?}: {e}\n  {text}\n  {caret}^"))
    })
}

fn parse_pair(flag: &str, text: &str) -> Result<(f64, f64), CliError> {
    let bad = || {
        CliError::Input(format!(
            "--{flag} expects two numbers \"a,b\", got {text:?}"
        ))
    };
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let number = |t: &str| match t.trim().parse::<f64>() {
        Ok(v) => Ok(v),
        Err(_) => parse_number(t).map(|r| r.to_f64()).map_err(|_| bad()),
    };
    Ok((number(a)?, number(b)?))
}

/// Everything a command needs, resolved from the flags.
struct Setup {
    web: WebSpec,
    policy: ZeroTestPolicy,
    params: BTreeMap<String, f64>,
}

fn setup(a: &RunArgs) -> Result<Setup, CliError> {
    let mut web = match a.example {
        Some(id) => case(id)
            .ok_or_else(|| CliError::Usage(format!("no corpus example {id}; choose 1-9")))?
            .web(),
        None => {
            let (Some(f), false) = (&a.f, a.g.is_empty()) else {
                return Err(CliError::Usage(
                    "need at least two web functions: --f EXPR and one or more --g EXPR".into(),
                ));
            };
            let f = parse_function("f", f)?;
            let gs =
                a.g.iter()
                    .map(|g| parse_function("g", g))
                    .collect::<Result<Vec<_>, _>>()?;
            WebSpec::new(f, gs).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    if let Some(d) = &a.domain {
        let domain: Domain = d
            .parse()
            .map_err(|e| CliError::Input(format!("--domain {d:?}: {e}")))?;
        web = web.with_domain(domain);
    }
    let mut params = BTreeMap::new();
    let mut domain = web.domain.clone();
    for p in &a.params {
        let bad = || CliError::Input(format!("--param expects NAME=VALUE, got {p:?}"));
        let (name, value) = p.split_once('=').ok_or_else(bad)?;
        let v = parse_number(value).map_err(|_| bad())?;
        let approx = value.trim().parse::<f64>().unwrap_or_else(|_| v.to_f64());
        params.insert(name.trim().to_string(), approx);
        domain = domain.with_param(name.trim(), v.clone(), v);
    }
    web = web.with_domain(domain).with_seed(a.seed);
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let policy = ZeroTestPolicy {
        points: a.samples,
        precision: a.precision,
        ..Default::default()
    };
    Ok(Setup {
        web,
        policy,
        params,
    })
}

fn config_json(command: &str, a: &RunArgs, s: &Setup) -> serde_json::Value {
    let params: BTreeMap<&String, String> =
        s.params.iter().map(|(k, v)| (k, v.to_string())).collect();
    let mut c = json!({
        "command": command,
        "domain": s.web.domain.to_string(),
        "seed": a.seed.to_string(),
        "samples": a.samples.to_string(),
        "precision": a.precision.to_string(),
        "params": params,
    });
    if command == "linearize" {
        c["grid"] = json!(a.grid.to_string());
        c["base"] = json!(a.base);
        c["lambda0"] = json!(a.lambda0);
        c["svg"] = json!(a.svg.as_ref().map(|p| p.display().to_string()));
        c["force"] = json!(a.force);
    }
    c
}

fn run_check(s: &Setup) -> Result<WebCheck, CliError> {
    check_dweb(&s.web, &s.policy).map_err(|e| CliError::Failed(e.to_string()))
}

fn print_check(check: &WebCheck, detailed: bool) {
    for r in &check.reports {
        println!("{}", invariant_summary(r));
        if detailed {
            print!("{}", evidence_table(r));
        }
    }
}

pub fn check(a: &RunArgs, detailed: bool) -> Result<u8, CliError> {
    let s = setup(a)?;
    let check = run_check(&s)?;
    let command = if detailed { "invariants" } else { "check" };
    if a.json {
        let report = Report::new(&s.web, config_json(command, a, &s), &check);
        println!("{}", report.to_json());
    } else {
        println!("{}", check.verdict);
        print_check(&check, detailed);
    }
    Ok(verdict_code(check.verdict))
}

pub fn linearize(a: &RunArgs) -> Result<u8, CliError> {
    let s = setup(a)?;
    let base = a
        .base
        .as_deref()
        .map(|b| parse_pair("base", b))
        .transpose()?;
    let lambda0 = parse_pair("lambda0", &a.lambda0)?;
    if a.grid < 5 {
        return Err(CliError::Usage(
            "--grid needs at least 5 nodes per side".into(),
        ));
    }
    let opts = LinearizeOptions {
        grid: a.grid,
        base,
        lambda0,
        params: s.params.clone(),
        force: a.force,
        ..Default::default()
    };
    let lin = match run_pipeline(&s.web, &opts, &s.policy) {
        Ok(lin) => lin,
        Err(LinearizeError::Refused(v)) => {
            eprintln!(
                "refusing to linearize: the linearizability check returned {v}, not YES; \
                 --force runs the pipeline anyway as a negative control"
            );
            return Ok(verdict_code(v));
        }
        Err(e @ LinearizeError::MissingParam(_)) => return Err(CliError::Input(e.to_string())),
        Err(e) => return Err(CliError::Failed(e.to_string())),
    };
    let check = match lin.check.clone() {
        Some(c) => c,
        None => run_check(&s)?,
    };
    if let Some(path) = &a.svg {
        let names: Vec<String> = foliations(&s.web).into_iter().map(|(n, _)| n).collect();
        let text = svg::render(&lin.result.grid, &lin.leaves, &names);
        std::fs::write(path, text)
            .map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))?;
    }
    if a.json {
        let report = Report::new(&s.web, config_json("linearize", a, &s), &check)
            .with_linearization(&lin.result);
        println!("{}", report.to_json());
    } else {
        println!("{}", check.verdict);
        print!("{}", linearization_table(&lin.result));
    }
    Ok(verdict_code(check.verdict))
}

pub fn selftest(a: &RunArgs) -> Result<u8, CliError> {
    let policy = ZeroTestPolicy {
        points: a.samples,
        precision: a.precision,
        ..Default::default()
    };
    let start = Instant::now();
    let mut runs: Vec<(String, WebSpec, WebVerdict)> = Vec::new();
    for c in cases() {
        runs.push((c.label(), c.web(), c.expected));
        runs.push((
            format!("{} (substituted)", c.label()),
            c.substituted(),
            c.expected,
        ));
    }
    runs.push(("linear 5-web".into(), linear_five_web(), WebVerdict::Yes));
    let mut matched = 0;
    for (label, web, expected) in &runs {
        let t = Instant::now();
        let web = web.clone().with_seed(a.seed);
        let got = check_dweb(&web, &policy)
            .map(|c| c.verdict)
            .map_err(|e| CliError::Failed(format!("{label}: {e}")))?;
        let ok = got == *expected;
        matched += usize::from(ok);
        println!(
            "{:<28} {:<12} expected {:<12} {} ({} ms)",
            label,
            got.to_string(),
            expected.to_string(),
            if ok { "ok" } else { "MISMATCH" },
            t.elapsed().as_millis()
        );
    }
    println!(
        "{matched}/{} verdicts match in {:.1} s",
        runs.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(if matched == runs.len() { 0 } else { 1 })
}
