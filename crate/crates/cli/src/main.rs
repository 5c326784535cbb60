fn main() {
    std::process::exit(qrisk_cli::run(std::env::args_os()));
}
