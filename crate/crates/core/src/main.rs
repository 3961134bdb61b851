fn main() {
    std::process::exit(survht::cli::main(std::env::args_os()));
}
