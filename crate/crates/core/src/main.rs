fn main() {
    std::process::exit(secretary_lab::cli::run(std::env::args_os()));
}
