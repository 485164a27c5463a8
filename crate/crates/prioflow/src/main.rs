fn main() {
    std::process::exit(prioflow::cli::main());
}
