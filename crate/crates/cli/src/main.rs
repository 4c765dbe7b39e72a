fn main() {
    std::process::exit(cdfuse_cli::run(std::env::args_os()));
}
