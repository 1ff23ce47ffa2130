fn main() {
    std::process::exit(liouville::cli::main_with_args(std::env::args_os()));
}
