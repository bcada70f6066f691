use clap::Parser;

fn main() {
    let cli = beliefctl::Cli::parse();
    if let Err(e) = beliefctl::run(&cli) {
        eprintln!("beliefctl: {e}");
        std::process::exit(e.exit_code());
    }
}
