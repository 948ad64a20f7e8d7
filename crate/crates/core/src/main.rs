fn main() {
    std::process::exit(chainfree::cli::main());
}
