fn main() {
    std::process::exit(kwskit::cli::run(std::env::args_os()));
}
