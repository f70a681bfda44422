use std::process::ExitCode;

fn main() -> ExitCode {
    match stgp_cli::run_from(std::env::args_os()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stgp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
