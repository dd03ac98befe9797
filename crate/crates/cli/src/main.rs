use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let (code, report, text) = revkit_cli::run(&argv);
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = if report.is_some() || code == 0 {
        writeln!(std::io::stdout(), "{text}")
    } else {
        writeln!(std::io::stderr(), "{text}")
    };
    std::process::exit(code);
}
