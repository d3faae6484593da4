fn main() {
    std::process::exit(stefan::cli::main_entry(std::env::args_os()));
}
