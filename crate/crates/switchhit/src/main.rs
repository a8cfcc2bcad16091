fn main() {
    std::process::exit(switchhit::cli::run());
}
