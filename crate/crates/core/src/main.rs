fn main() {
    std::process::exit(eccentric::cli::main());
}
