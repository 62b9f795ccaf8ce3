fn main() {
    std::process::exit(proact::cli::run(std::env::args_os()));
}
