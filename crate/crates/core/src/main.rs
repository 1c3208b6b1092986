fn main() {
    std::process::exit(wavelab::cli::main_from(std::env::args_os()));
}
