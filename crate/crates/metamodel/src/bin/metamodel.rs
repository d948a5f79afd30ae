fn main() {
    std::process::exit(metamodel::cli::run(std::env::args_os()));
}
