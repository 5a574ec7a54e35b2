fn main() {
    std::process::exit(uccsim::cli::run(std::env::args_os()));
}
