use clap::Parser;

use permstat::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let code = run(cli, &mut stdout, &mut stderr);
    std::process::exit(code);
}
