fn main() {
    std::process::exit(oscstab::cli::main());
}
