use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    match modfront_cli::cli::run(std::env::args_os()) {
        Ok(text) => {
            if !text.is_empty() {
                // A closed pipe (e.g. `| head`) is not a failure.
                let _ = writeln!(std::io::stdout(), "{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("modfront: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
