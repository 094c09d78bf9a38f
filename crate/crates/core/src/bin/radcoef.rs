fn main() {
    std::process::exit(radcoef::cli::run(std::env::args_os()));
}
