use std::process::ExitCode;

fn main() -> ExitCode {
    match breakscan_cli::run(std::env::args().collect()) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return if clap_err.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
