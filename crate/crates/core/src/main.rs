fn main() {
    std::process::exit(cachepriv::cli::run(std::env::args_os()));
}
