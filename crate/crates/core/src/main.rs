fn main() {
    std::process::exit(niirf::cli::run(std::env::args_os()));
}
