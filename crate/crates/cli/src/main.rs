fn main() {
    std::process::exit(ladder_cli::main_with(std::env::args_os()));
}
