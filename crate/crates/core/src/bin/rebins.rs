fn main() {
    std::process::exit(rebins::cli::main_with(std::env::args_os()));
}
