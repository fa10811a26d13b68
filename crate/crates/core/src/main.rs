fn main() {
    std::process::exit(decouple::cli::main_with_args(std::env::args_os()));
}
