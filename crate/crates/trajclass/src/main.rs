fn main() {
    std::process::exit(trajclass::cli::run(std::env::args()));
}
