fn main() {
    std::process::exit(ergolab::cli::cli_main());
}
