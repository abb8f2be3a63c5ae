fn main() {
    std::process::exit(tdoa_seek::cli::main());
}
