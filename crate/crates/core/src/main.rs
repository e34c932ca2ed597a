fn main() {
    std::process::exit(vemflux::cli::main_with_args(std::env::args_os()));
}
