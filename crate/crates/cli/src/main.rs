fn main() {
    std::process::exit(surgnn_cli::run(std::env::args_os()));
}
