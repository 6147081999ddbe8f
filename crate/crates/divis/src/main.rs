fn main() {
    std::process::exit(divis::cli::run(std::env::args_os()));
}
