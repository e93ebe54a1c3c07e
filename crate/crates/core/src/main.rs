use clap::Parser;

fn main() -> std::process::ExitCode {
    pt_spectra::cli::main_with(pt_spectra::cli::Args::parse())
}
