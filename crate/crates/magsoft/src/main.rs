fn main() {
    std::process::exit(magsoft::cli::main_with_args(std::env::args_os()));
}
