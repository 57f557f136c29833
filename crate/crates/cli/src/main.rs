use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let start = Instant::now();
    let mut out = algmech_cli::run(std::env::args_os());
    for (path, contents) in &out.files {
        if let Err(e) = std::fs::write(path, contents) {
            out.stderr.push_str(&format!("error: cannot write {}: {e}\n", path.display()));
            out.exit_code = algmech_cli::EXIT_CONFIG;
        }
    }
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    if !out.stdout.is_empty() && out.stdout.starts_with('{') {
        eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    }
    ExitCode::from(out.exit_code as u8)
}
