fn main() {
    std::process::exit(devbound_cli::run(std::env::args_os()));
}
