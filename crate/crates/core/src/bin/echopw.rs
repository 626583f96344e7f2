fn main() {
    std::process::exit(echopw::cli::run(std::env::args_os()));
}
