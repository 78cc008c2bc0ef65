fn main() {
    std::process::exit(netwave::cli::main_with_args(std::env::args_os()));
}
