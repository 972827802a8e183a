mod args;
mod run;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use run::{error_json, Failure, Output};

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("EXCAP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("EXCAP_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn write(out: &Output, cli: &Cli) -> Result<(), Failure> {
    let common = cli.command.common();
    if let (Some(text), Some(file)) = (&out.csv, &common.csv) {
        fs::write(file, text).map_err(|e| Failure::Output(format!("cannot write {}: {e}", file.display())))?;
    }
    match &common.out {
        Some(file) => fs::write(file, &out.json)
            .map_err(|e| Failure::Output(format!("cannot write {}: {e}", file.display()))),
        None => std::io::stdout()
            .write_all(out.json.as_bytes())
            .map_err(|e| Failure::Output(e.to_string())),
    }
}

fn fail(f: &Failure) -> ExitCode {
    eprintln!("{}", error_json(f));
    ExitCode::from(f.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit();
        }
        Err(e) => return fail(&Failure::Usage(e.render().to_string().trim().to_string())),
    };
    if let Err(f) = threads() {
        return fail(&f);
    }
    let common = cli.command.common();
    let out = match run::run(&cli.command) {
        Ok(o) => o,
        Err(f) => return fail(&f),
    };
    if out.csv.is_none() && common.csv.is_some() {
        return fail(&Failure::Usage(format!("{} has no CSV output", cli.command.name())));
    }
    if let Err(f) = write(&out, &cli) {
        return fail(&f);
    }
    match &out.warning {
        Some(w) => fail(w),
        None => ExitCode::SUCCESS,
    }
}
