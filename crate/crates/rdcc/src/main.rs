fn main() {
    std::process::exit(rdcc::cli::main_with(std::env::args_os()));
}
