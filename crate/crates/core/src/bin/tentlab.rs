fn main() {
    std::process::exit(tentlab::cli::run(std::env::args_os()));
}
