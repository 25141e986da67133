use clap::Parser;

use cavity_sense_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(dir) => println!("wrote {}", dir.path().display()),
        Err(e) => {
            eprintln!("cavity-sense: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
