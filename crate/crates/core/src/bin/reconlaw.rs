fn main() {
    std::process::exit(reconlaw::harness::cli::run(std::env::args_os()));
}
