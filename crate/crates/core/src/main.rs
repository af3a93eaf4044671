fn main() {
    std::process::exit(starflow::cli::main_with_args(std::env::args_os()));
}
