fn main() {
    std::process::exit(vat_cli::main_with_args(std::env::args_os()));
}
