fn main() {
    std::process::exit(raydio::cli::main());
}
