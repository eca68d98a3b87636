use std::io;

use perfect_sim::cli::{execute, parse_args};

fn main() {
    let config = parse_args(std::env::args_os()).unwrap_or_else(|e| e.exit());
    let code = execute(&config, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
