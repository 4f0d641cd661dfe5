fn main() {
    std::process::exit(ion_heating::cli::main_with(std::env::args_os()));
}
