fn main() {
    std::process::exit(textlab_core::cli::main());
}
