fn main() {
    std::process::exit(smm::cli::run_from(std::env::args_os()));
}
