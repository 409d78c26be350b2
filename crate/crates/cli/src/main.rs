fn main() {
    std::process::exit(diamag_cli::run(std::env::args_os()));
}
