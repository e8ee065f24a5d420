fn main() {
    std::process::exit(dualcan_cli::run(std::env::args_os()));
}
