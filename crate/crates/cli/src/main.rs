fn main() {
    std::process::exit(tomosar_cli::commands::run_from_args(std::env::args_os()));
}
