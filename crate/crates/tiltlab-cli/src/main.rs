use clap::Parser;

use tiltlab_cli::cli::Cli;
use tiltlab_cli::{execute, exit_code};

fn main() {
    let cli = Cli::parse();
    let result = cli.into_config().and_then(execute);
    match &result {
        Ok(o) => {
            for r in &o.reports {
                println!("{} {} {} = {:.6}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.statistic, r.value);
            }
            for p in &o.outputs {
                eprintln!("wrote {}", p.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
