fn main() {
    std::process::exit(proxdist::cli::parse_and_dispatch(std::env::args_os()));
}
