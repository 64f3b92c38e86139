fn main() {
    std::process::exit(superexp_cli::run(std::env::args_os()));
}
