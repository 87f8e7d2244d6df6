fn main() {
    std::process::exit(hllab::cli::run(std::env::args_os()));
}
