fn main() {
    std::process::exit(xdep_cli::run(std::env::args_os()));
}
