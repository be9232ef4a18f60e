fn main() {
    std::process::exit(qpcd_cli::run());
}
