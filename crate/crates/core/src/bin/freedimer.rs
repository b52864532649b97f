fn main() {
    std::process::exit(freedimer::cli::run(std::env::args_os()));
}
