fn main() {
    std::process::exit(ncprob_cli::run(std::env::args_os()));
}
