mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::fs;
use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

fn run(argv: Vec<OsString>) -> u8 {
    let entries = match config::config_path(&argv) {
        Some(path) => match config::read_config(&path) {
            Ok(e) => e,
            Err(msg) => {
                eprintln!("error: {msg}");
                return 2;
            }
        },
        None => Vec::new(),
    };
    let (argv, file_out_dir) = config::inject(argv, &entries);
    let mut cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    cli.command.resolve_defaults();
    let out_dir = config::resolve_out_dir(cli.out_dir.clone(), std::env::var_os(config::OUT_DIR_ENV), file_out_dir);

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.workers);
            return 1;
        }
    };
    let output = match pool.install(|| commands::run(&cli.command, cli.seed)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return commands::exit_code(&e);
        }
    };

    let name = cli.command.name();
    let document = commands::envelope(&cli.command, output.report, cli.workers, cli.seed);
    let json_path = out_dir.join(format!("{name}.json"));
    let csv_path = out_dir.join(format!("{name}.csv"));
    let written = fs::create_dir_all(&out_dir)
        .and_then(|_| fs::write(&json_path, serde_json::to_string_pretty(&document).expect("json") + "\n"))
        .and_then(|_| fs::write(&csv_path, &output.csv));
    if let Err(e) = written {
        eprintln!("error: cannot write to {}: {e}", out_dir.display());
        return 1;
    }
    println!("{}", output.summary);
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    0
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os().collect()))
}
