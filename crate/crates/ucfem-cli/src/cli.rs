//! Argument parsing and dispatch: `ucfem <subcommand> [--config FILE]
//! [--key VALUE ...] --out DIR`. Command-line keys override config-file
//! values, which override built-in defaults. The output directory comes from
//! `--out` or, as a fallback, the `UCFEM_OUT` environment variable.

use std::fs;
use std::path::PathBuf;

use crate::commands::{command_help, find_command, CliError, Command, Outputs, COMMANDS};
use crate::config;

/// Environment variable supplying the default output directory.
pub const OUT_ENV: &str = "UCFEM_OUT";

/// A parsed invocation, before config resolution.
#[derive(Debug)]
pub struct Invocation {
    pub command: &'static Command,
    pub config_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub flags: Vec<(String, String)>,
    pub help: bool,
}

/// Either a help request or a runnable invocation.
#[derive(Debug)]
pub enum Parsed {
    GlobalHelp,
    Run(Invocation),
}

/// Global usage page listing the subcommands and conventions.
pub fn usage() -> String {
    let mut s = String::from(
        "ucfem - mixed finite element experiments: unique continuation and\n\
         coefficient reconstruction on the unit disc\n\n\
         usage: ucfem <subcommand> [--config FILE] [--key VALUE ...] --out DIR\n\n\
         subcommands:\n",
    );
    for cmd in COMMANDS {
        s.push_str(&format!("  {:<16} {}\n", cmd.name, cmd.about));
    }
    s.push_str(
        "\noptions:\n\
         \x20 --config FILE    read `key = value` lines (# comments, [section] headers allowed)\n\
         \x20 --out DIR        output directory (default: the UCFEM_OUT environment variable)\n\
         \x20 --key VALUE      override any config key for the chosen subcommand\n\
         \x20 --help           this page, or the key table of a subcommand\n\n\
         run `ucfem <subcommand> --help` for the full key table of a subcommand.\n",
    );
    s
}

/// Splits raw arguments into subcommand, reserved options and key overrides.
pub fn parse_args(args: &[String]) -> Result<Parsed, CliError> {
    let mut iter = args.iter().peekable();
    let Some(first) = iter.next() else {
        return Err(CliError::Usage(format!(
            "missing subcommand\n\n{}",
            usage()
        )));
    };
    if first == "--help" || first == "-h" || first == "help" {
        return Ok(Parsed::GlobalHelp);
    }
    let Some(command) = find_command(first) else {
        return Err(CliError::Usage(format!(
            "unknown subcommand '{first}'; expected one of: {}",
            COMMANDS.iter().map(|c| c.name).collect::<Vec<_>>().join(", ")
        )));
    };

    let mut config_path = None;
    let mut out_dir = None;
    let mut flags = Vec::new();
    let mut help = false;
    while let Some(arg) = iter.next() {
        if arg == "--help" || arg == "-h" {
            help = true;
            continue;
        }
        let Some(name) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!(
                "unexpected argument '{arg}'; keys are passed as '--key VALUE'"
            )));
        };
        let Some(value) = iter.next() else {
            return Err(CliError::Usage(format!("flag '--{name}' expects a value")));
        };
        match name {
            "config" => config_path = Some(PathBuf::from(value)),
            "out" => out_dir = Some(PathBuf::from(value)),
            _ => flags.push((name.to_string(), value.clone())),
        }
    }
    Ok(Parsed::Run(Invocation { command, config_path, out_dir, flags, help }))
}

/// Parses, resolves and runs one invocation. On failure the caller receives
/// the error plus the list of files already written, for the partial-output
/// diagnostic.
pub fn run(args: &[String]) -> Result<(), (CliError, Vec<String>)> {
    let inv = match parse_args(args).map_err(|e| (e, Vec::new()))? {
        Parsed::GlobalHelp => {
            print!("{}", usage());
            return Ok(());
        }
        Parsed::Run(inv) => inv,
    };
    if inv.help {
        print!("{}", command_help(inv.command));
        return Ok(());
    }

    let file_text = match &inv.config_path {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| {
            (CliError::Config(format!("cannot read config {}: {e}", path.display())), Vec::new())
        })?),
        None => None,
    };
    let resolved = config::resolve(inv.command.keys, file_text.as_deref(), &inv.flags)
        .map_err(|e| (CliError::from(e), Vec::new()))?;

    let out_dir = inv
        .out_dir
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            (
                CliError::Usage(format!("missing --out DIR (or the {OUT_ENV} environment variable)")),
                Vec::new(),
            )
        })?;
    fs::create_dir_all(&out_dir).map_err(|e| {
        (CliError::Run(format!("cannot create output directory {}: {e}", out_dir.display())), Vec::new())
    })?;

    let mut outputs = Outputs::new(out_dir);
    match (inv.command.run)(&resolved, &mut outputs) {
        Ok(()) => {
            println!(
                "wrote {} file(s) to {}: {}",
                outputs.written.len(),
                outputs.dir().display(),
                outputs.written.join(", ")
            );
            Ok(())
        }
        Err(e) => Err((e, outputs.written.clone())),
    }
}
