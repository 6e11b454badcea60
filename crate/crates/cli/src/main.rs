fn main() {
    std::process::exit(ergolab_cli::run_cli(std::env::args_os()));
}
