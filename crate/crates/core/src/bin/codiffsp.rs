fn main() {
    std::process::exit(codiffsp::cli::main_with(std::env::args_os()));
}
