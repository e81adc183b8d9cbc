fn main() {
    std::process::exit(simstream::cli::main_with_std());
}
