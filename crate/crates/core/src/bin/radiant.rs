fn main() {
    std::process::exit(radiant_core::cli::run(std::env::args_os()));
}
