fn main() {
    std::process::exit(quadplan::cli::run(std::env::args_os()));
}
