fn main() {
    std::process::exit(npiv_cli::main_with_args(std::env::args_os()));
}
