fn main() {
    std::process::exit(lbn::cli::run_cli(std::env::args_os()));
}
