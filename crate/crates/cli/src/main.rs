fn main() {
    std::process::exit(putwb_cli::main_with_args(std::env::args_os()));
}
