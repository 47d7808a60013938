fn main() {
    std::process::exit(transposer::cli::run(std::env::args_os()));
}
