use std::process::ExitCode;

use clap::Parser;
use glycemic_cli::failure::{classify, error_line, fail, Kind};
use glycemic_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let err = fail(Kind::Usage, first.trim_start_matches("error: ").to_string());
            eprintln!("{}", error_line(&err));
            return ExitCode::from(Kind::Usage.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::from(classify(&err).exit_code() as u8)
        }
    }
}
