use std::io::{self, Write};
use std::process::ExitCode;

use hfee::cli::CliError;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    match hfee::cli::run(std::env::args_os(), &mut out, &mut err) {
        Ok(()) => ExitCode::SUCCESS,
        // Reader went away (e.g. piped into `head`); nothing left to report.
        Err(CliError::Output(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::FAILURE
        }
    }
}
