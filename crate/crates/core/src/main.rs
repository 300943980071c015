fn main() {
    std::process::exit(watertight::cli::main_with_args(std::env::args_os()));
}
