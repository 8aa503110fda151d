fn main() {
    std::process::exit(acnkit::cli::run(std::env::args_os()));
}
