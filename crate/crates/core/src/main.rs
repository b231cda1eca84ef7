fn main() {
    std::process::exit(numfix::cli::run(std::env::args_os()));
}
