fn main() {
    std::process::exit(fda_align::cli::run(std::env::args_os()));
}
