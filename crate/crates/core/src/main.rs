fn main() {
    std::process::exit(citeqa::cli::main());
}
