fn main() {
    std::process::exit(logitq::cli::run(std::env::args_os()));
}
