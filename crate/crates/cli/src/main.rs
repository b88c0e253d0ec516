fn main() {
    dirgrad_cli::init_logging();
    std::process::exit(dirgrad_cli::main_with_args(std::env::args_os()));
}
