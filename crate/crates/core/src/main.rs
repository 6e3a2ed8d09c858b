fn main() {
    std::process::exit(rooftop::cli::run(std::env::args_os()));
}
