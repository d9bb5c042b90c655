use clap::Parser;

fn main() {
    let cli = ldm_cli::Cli::parse();
    if let Err(e) = ldm_cli::run(cli) {
        eprintln!("ldm: {e}");
        std::process::exit(e.code());
    }
}
