fn main() {
    std::process::exit(glarnet::cli::run_from(std::env::args_os()));
}
