fn main() {
    std::process::exit(mixflow::cli::run(std::env::args_os()));
}
