fn main() {
    std::process::exit(avq::cli::run());
}
