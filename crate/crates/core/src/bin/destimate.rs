use std::io::{self, Write};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DESTIMATE_LOG", "error")).init();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = destimate::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = io::stdout().flush();
    std::process::exit(code);
}
