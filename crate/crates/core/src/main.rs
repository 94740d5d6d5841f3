fn main() {
    std::process::exit(wigdist::cli::run(std::env::args_os()));
}
