fn main() {
    std::process::exit(loa::cli::run(std::env::args_os()));
}
