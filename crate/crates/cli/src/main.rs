use clap::Parser;
use oamtopo_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = cli.overrides.resolve().and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("oamtopo: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
