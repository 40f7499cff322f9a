fn main() {
    std::process::exit(coagfrag::cli::run(std::env::args_os()));
}
