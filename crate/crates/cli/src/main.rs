use clap::Parser;
use peakon_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    let code = match peakon_cli::main_with(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("peakon-lab: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
