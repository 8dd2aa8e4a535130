fn main() {
    std::process::exit(flocksense::cli::cli_main(std::env::args_os()));
}
