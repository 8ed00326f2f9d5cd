fn main() {
    std::process::exit(tucker::cli::run(std::env::args_os()));
}
