fn main() {
    std::process::exit(bonsai::cli::main_with_args(std::env::args_os()));
}
