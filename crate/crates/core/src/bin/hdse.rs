fn main() {
    std::process::exit(hdse::cli::run());
}
