fn main() {
    let code = cvpi::cli::run(std::env::args_os());
    std::process::exit(code);
}
