fn main() {
    std::process::exit(layerfuse::cli::run(std::env::args()));
}
