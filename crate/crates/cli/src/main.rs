fn main() {
    std::process::exit(morphnet_cli::main_impl());
}
