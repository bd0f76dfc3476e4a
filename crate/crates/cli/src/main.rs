use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match celebbasis_cli::run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(text) = err.display_text() {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error[{}]: {}", err.kind_label(), err.one_line());
            ExitCode::from(err.exit_code())
        }
    }
}
