fn main() {
    std::process::exit(wikisvd::cli::run_command(std::env::args_os()));
}
