fn main() {
    std::process::exit(h2pid::cli::run(std::env::args_os()));
}
