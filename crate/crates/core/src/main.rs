fn main() {
    std::process::exit(hamsplit::cli::run(std::env::args_os()));
}
