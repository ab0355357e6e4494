fn main() {
    std::process::exit(guided_projections::cli::run(std::env::args_os()));
}
