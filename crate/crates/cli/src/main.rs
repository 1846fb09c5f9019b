use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let env_format = std::env::var("HYCAUSE_FORMAT").ok();
    let out = hycause_cli::run(std::env::args_os(), env_format.as_deref());
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(u8::try_from(out.code).unwrap_or(1))
}
