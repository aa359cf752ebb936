fn main() {
    std::process::exit(sppkit::cli::run(std::env::args_os()));
}
