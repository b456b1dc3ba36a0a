fn main() {
    std::process::exit(swi_core::cli::main_with_args(std::env::args_os()));
}
