fn main() {
    std::process::exit(varexp::cli::main_with_args(std::env::args().collect()));
}
