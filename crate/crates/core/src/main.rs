fn main() {
    std::process::exit(refmc::cli::run(std::env::args_os()));
}
