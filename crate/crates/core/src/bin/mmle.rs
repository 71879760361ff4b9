fn main() {
    std::process::exit(mmle::cli::main_entry(std::env::args_os()));
}
