fn main() {
    std::process::exit(ddx::cli::run(std::env::args_os()));
}
