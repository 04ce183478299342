fn main() {
    std::process::exit(kwbgw::cli::run(std::env::args_os()));
}
