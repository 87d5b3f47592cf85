use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anonradio::config::{
    gen_gm, gen_hm, gen_random, gen_sm, normalize_tags, random_batch, RandomParams,
    RANDOM_GENERATOR_ID,
};
use anonradio::election::{elect_with, run_canonical, ElectionError};
use anonradio::{cross_check, Configuration, OracleReport, SimOptions};
use rayon::prelude::*;
use serde_json::json;

use crate::status;
use crate::{Family, Format};

type Outcome = Result<u8, String>;

/// Reads, validates and, if needed, shifts tags so the minimum is 0.
pub fn load(path: &Path) -> Result<Configuration, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let c: Configuration = text
        .parse()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    anonradio::validate(&c)
        .into_result()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if c.is_normalized() {
        return Ok(c);
    }
    eprintln!(
        "note: {}: wakeup tags shifted down by {} so the smallest is 0",
        path.display(),
        c.min_tag()
    );
    Ok(normalize_tags(&c))
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

fn options(round_cap: Option<u64>) -> SimOptions {
    SimOptions { round_cap }
}

/// The configuration as an undirected DOT graph, nodes colored by class.
fn classes_dot(c: &Configuration, classes: &[u32]) -> String {
    const PALETTE: [&str; 8] = [
        "lightblue",
        "palegreen",
        "gold",
        "pink",
        "orange",
        "plum",
        "khaki",
        "lightgray",
    ];
    let mut out = String::from("graph configuration {\n");
    for (v, &class) in classes.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {v} [label=\"{v} t={} c={class}\", style=filled, fillcolor={}];",
            c.tag(v),
            PALETTE[(class as usize - 1) % PALETTE.len()]
        );
    }
    for (a, b) in c.edges() {
        let _ = writeln!(out, "  {a} -- {b};");
    }
    out.push_str("}\n");
    out
}

pub fn classify(path: &Path, trace_path: Option<&Path>, format: Format, strict: bool) -> Outcome {
    let c = load(path)?;
    let trace = anonradio::classify(&c).map_err(|e| e.to_string())?;
    let document = to_json(&trace.to_document());
    if let Some(p) = trace_path {
        write_file(p, &document)?;
    }
    match format {
        Format::Text => println!("{}", trace.verdict),
        Format::Doc => print!("{document}"),
        Format::Dot => print!("{}", classes_dot(&c, &trace.final_snapshot().classes)),
    }
    Ok(if strict && !trace.verdict.is_yes() {
        status::INFEASIBLE
    } else {
        status::OK
    })
}

pub fn elect(
    path: &Path,
    trace_path: Option<&Path>,
    format: Format,
    round_cap: Option<u64>,
) -> Outcome {
    let c = load(path)?;
    let (result, run) = match elect_with(&c, options(round_cap)) {
        Ok(ok) => ok,
        Err(ElectionError::Infeasible { iteration }) => {
            println!("INFEASIBLE iteration={iteration}");
            eprintln!("no leader can be elected in this configuration");
            return Ok(status::INFEASIBLE);
        }
        Err(e @ ElectionError::NotUnique { .. }) => {
            eprintln!("mismatch: {e}");
            return Ok(status::MISMATCH);
        }
        Err(e) => return Err(e.to_string()),
    };
    if let Some(p) = trace_path {
        write_file(p, &to_json(&run.execution))?;
    }
    match format {
        Format::Text => println!(
            "LEADER node={} class={} iteration={} rounds={}",
            result.leader, result.winning_class, result.verdict_iteration, result.rounds_used
        ),
        Format::Doc => print!("{}", to_json(&result)),
        Format::Dot => print!("{}", run.execution.to_dot(&c)),
    }
    Ok(status::OK)
}

pub fn simulate(
    path: &Path,
    trace_path: Option<&Path>,
    format: Format,
    round_cap: Option<u64>,
) -> Outcome {
    let c = load(path)?;
    let run = run_canonical(&c, options(round_cap)).map_err(|e| e.to_string())?;
    let execution = &run.execution;
    if let Some(p) = trace_path {
        write_file(p, &to_json(execution))?;
    }
    match format {
        Format::Text => {
            let transmissions: usize = execution.rounds.iter().map(|r| r.transmitters.len()).sum();
            println!(
                "SIMULATED rounds={} transmissions={} last_termination={} phases={}",
                execution.total_global_rounds,
                transmissions,
                execution.last_termination_round(),
                run.protocol.num_phases()
            );
        }
        Format::Doc => print!("{}", to_json(execution)),
        Format::Dot => print!("{}", execution.to_dot(&c)),
    }
    Ok(status::OK)
}

pub fn generate(family: &Family, output: Option<&Path>) -> Outcome {
    let text = match *family {
        Family::Hm { m } => gen_hm(m).map(|c| c.to_text()),
        Family::Sm { m } => gen_sm(m).map(|c| c.to_text()),
        Family::Gm { m } => gen_gm(m).map(|c| c.to_text()),
        Family::Random {
            n,
            p,
            max_tag,
            seed,
        } => {
            let params = RandomParams {
                n,
                edge_prob: p,
                max_tag,
                seed,
            };
            gen_random(n, p, max_tag, seed).map(|c| c.to_text_with_comments(&[params.to_string()]))
        }
    }
    .map_err(|e| e.to_string())?;
    match output {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(status::OK)
}

pub fn check_file(path: &Path, format: Format) -> Outcome {
    let c = load(path)?;
    let report = cross_check(&c).map_err(|e| e.to_string())?;
    match format {
        Format::Doc => print!("{}", to_json(&report)),
        _ => println!(
            "checked 1 configuration: {} mismatches (verdict {})",
            report.mismatches.len(),
            report.verdict
        ),
    }
    Ok(if report.is_clean() {
        status::OK
    } else {
        status::MISMATCH
    })
}

pub fn check_batch(params: &[u64], format: Format) -> Outcome {
    let [n_max, tag_max, count, seed] = params else {
        return Err("--random expects N_MAX TAG_MAX COUNT SEED".into());
    };
    if *n_max == 0 {
        return Err("N_MAX must be at least 1".into());
    }
    let batch = random_batch(*n_max as usize, *tag_max, *count as usize, *seed);
    let reports: Vec<(RandomParams, Result<OracleReport, String>)> = batch
        .into_par_iter()
        .map(|s| {
            let report = s
                .generate()
                .and_then(|c| cross_check(&c))
                .map_err(|e| e.to_string());
            (s, report)
        })
        .collect();

    let mut feasible = 0;
    let mut mismatches = 0;
    let mut failures = Vec::new();
    for (s, r) in &reports {
        match r {
            Ok(report) => {
                feasible += usize::from(report.unique_history_exists);
                mismatches += report.mismatches.len();
                if !report.is_clean() {
                    failures.push(json!({ "instance": s.to_string(), "report": report }));
                }
            }
            Err(e) => return Err(format!("{s}: {e}")),
        }
    }
    match format {
        Format::Doc => print!(
            "{}",
            to_json(&json!({
                "generator": RANDOM_GENERATOR_ID,
                "n_max": n_max,
                "tag_max": tag_max,
                "count": count,
                "seed": seed,
                "feasible": feasible,
                "mismatches": mismatches,
                "failures": failures,
            }))
        ),
        _ => {
            for f in &failures {
                eprintln!("mismatch: {}", f["instance"]);
            }
            println!(
                "checked {count} configurations ({feasible} feasible): {mismatches} mismatches"
            );
        }
    }
    Ok(if mismatches == 0 {
        status::OK
    } else {
        status::MISMATCH
    })
}
