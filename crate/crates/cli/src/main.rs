fn main() {
    std::process::exit(brq_cli::main_with_args(std::env::args_os()));
}
