fn main() {
    std::process::exit(degenlab::cli::main_with_args(std::env::args_os()));
}
