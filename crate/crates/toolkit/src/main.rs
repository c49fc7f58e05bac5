fn main() {
    std::process::exit(mimicguard::cli::run(std::env::args_os().skip(1)));
}
