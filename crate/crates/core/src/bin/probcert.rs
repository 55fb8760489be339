fn main() {
    std::process::exit(probcert::cli::run_from_args(std::env::args_os()));
}
