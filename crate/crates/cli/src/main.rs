fn main() {
    std::process::exit(breather_cli::main_entry(std::env::args_os()));
}
