fn main() {
    std::process::exit(rescomp::cli::main_with_args(std::env::args_os()));
}
