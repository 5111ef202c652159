fn main() {
    std::process::exit(aps_cli::run(std::env::args_os()));
}
