fn main() {
    std::process::exit(covlda::cli::cli_main(std::env::args_os()));
}
