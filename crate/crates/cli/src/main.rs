mod args;
mod bench;
mod commands;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use args::{BenchArgs, Cli, Command, ReplayArgs};
use error::{CliError, Status};
use manifest::{RunManifest, Sink, MANIFEST_FILE, STDIN_COPY};

fn main() -> ExitCode {
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let argv: Vec<String> = std::env::args().skip(1).collect();
    ExitCode::from(execute(&argv) as u8)
}

/// Caps the worker pool from `NMFKIT_THREADS`.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("NMFKIT_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("NMFKIT_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Parses and runs one command line, returning the process exit code.
fn execute(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(std::iter::once("nmfkit".to_string()).chain(argv.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli.command, argv) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cmd: &Command, argv: &[String]) -> Result<Status, CliError> {
    let start = Instant::now();
    let mut sink = Sink::new(cmd.out_dir())?;
    let status = match cmd {
        Command::Factorize(a) => commands::factorize_cmd(a, &mut sink)?,
        Command::Rankplus(a) => commands::rankplus_cmd(a, &mut sink)?,
        Command::Separable(a) => commands::separable_cmd(a, &mut sink)?,
        Command::Slack(a) => commands::slack_cmd(a, &mut sink)?,
        Command::Lift(a) => commands::lift_cmd(a, &mut sink)?,
        Command::Hexagon(a) => commands::hexagon_cmd(a, &mut sink)?,
        Command::Npp(a) => commands::npp_cmd(a, &mut sink)?,
        Command::HsiGen(a) => commands::hsi_gen_cmd(a, &mut sink)?,
        Command::HsiUnmix(a) => commands::hsi_unmix_cmd(a, &mut sink)?,
        Command::Bench(a) => bench_cmd(a, &mut sink)?,
        Command::Replay(a) => return replay_cmd(a),
    };
    if let Some(dir) = sink.dir() {
        let mut inputs: Vec<String> = Vec::new();
        if let Some(Some(p)) = cmd.matrix_input() {
            inputs.push(p.display().to_string());
        }
        let stdin_copy = sink.outputs.contains_key(STDIN_COPY).then(|| dir.join(STDIN_COPY).display().to_string());
        let manifest = RunManifest {
            command: cmd.name().to_string(),
            argv: argv.to_vec(),
            config: serde_json::to_value(cmd).expect("arguments serialize"),
            seed: cmd.seed(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            stdin_copy,
            out_dir: dir.display().to_string(),
            outputs: sink.outputs.clone(),
            exit_code: status.code(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
            .map_err(|e| CliError::io(&path, e))?;
    }
    Ok(status)
}

fn bench_cmd(a: &BenchArgs, sink: &mut Sink) -> Result<Status, CliError> {
    let suites: Vec<&bench::Suite> = if a.suite == "all" {
        bench::SUITES.iter().collect()
    } else {
        vec![bench::find(&a.suite).ok_or_else(|| {
            let names: Vec<&str> = bench::SUITES.iter().map(|s| s.name).collect();
            CliError::Usage(format!("unknown suite '{}'; known: all, {}", a.suite, names.join(", ")))
        })?]
    };
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed.wrapping_add(i)).collect();
    let mut table = String::from("suite,seed,metric,value\n");
    let mut summaries = Vec::new();
    for suite in suites {
        let (rows, summary) = bench::run_suite(suite, &seeds)?;
        for (seed, metrics) in &rows {
            for (k, v) in metrics {
                table.push_str(&format!("{},{seed},{k},{v:e}\n", suite.name));
            }
        }
        eprintln!(
            "{} {:<10} {} ({})",
            if summary.passed { "PASS" } else { "FAIL" },
            summary.suite,
            summary.note,
            suite.about
        );
        summaries.push(summary);
    }
    sink.write("summary.csv", &table)?;
    let mut text = serde_json::to_string_pretty(&summaries).expect("summary serializes");
    text.push('\n');
    print!("{text}");
    sink.write("result.json", &text)?;
    Ok(if summaries.iter().all(|s| s.passed) { Status::Ok } else { Status::VerificationFailed })
}

#[derive(Serialize)]
struct ReplayReport {
    manifest: String,
    out_dir: String,
    exit_code: i32,
    recorded_exit_code: i32,
    identical: bool,
    mismatched: Vec<String>,
}

/// Reruns the recorded argument list into a fresh directory and compares
/// output fingerprints with the manifest.
fn replay_cmd(a: &ReplayArgs) -> Result<Status, CliError> {
    let m = RunManifest::read(&a.manifest)?;
    let out = a.out_dir.clone().unwrap_or_else(|| PathBuf::from(&m.out_dir).join("replay"));
    let argv = replay_argv(&m, &out);
    let code = execute(&argv);
    let fresh = RunManifest::read(&out.join(MANIFEST_FILE))?;
    let mut mismatched: Vec<String> = m
        .outputs
        .iter()
        .filter(|(name, _)| name.as_str() != STDIN_COPY)
        .filter(|(name, hash)| fresh.outputs.get(*name) != Some(hash))
        .map(|(name, _)| name.clone())
        .collect();
    mismatched.extend(fresh.outputs.keys().filter(|k| !m.outputs.contains_key(*k)).cloned());
    let report = ReplayReport {
        manifest: a.manifest.display().to_string(),
        out_dir: out.display().to_string(),
        exit_code: code,
        recorded_exit_code: m.exit_code,
        identical: mismatched.is_empty() && code == m.exit_code,
        mismatched,
    };
    eprint!("{}", serde_json::to_string_pretty(&report).expect("report serializes") + "\n");
    Ok(if report.identical { Status::Ok } else { Status::VerificationFailed })
}

/// Recorded arguments with the output directory swapped and a saved stdin
/// copy passed as the input file.
fn replay_argv(m: &RunManifest, out: &Path) -> Vec<String> {
    let mut argv = Vec::with_capacity(m.argv.len() + 3);
    let mut skip = false;
    for arg in &m.argv {
        if skip {
            skip = false;
            continue;
        }
        if arg == "--out-dir" {
            skip = true;
            continue;
        }
        if arg.starts_with("--out-dir=") {
            continue;
        }
        argv.push(arg.clone());
    }
    argv.push("--out-dir".into());
    argv.push(out.display().to_string());
    if let Some(copy) = &m.stdin_copy {
        argv.push(copy.clone());
    }
    argv
}
