fn main() {
    std::process::exit(selfsim::cli::main_entry(std::env::args_os()));
}
