fn main() {
    std::process::exit(vesselnet::cli::run());
}
