fn main() {
    std::process::exit(gapcast::cli::run(std::env::args_os()));
}
