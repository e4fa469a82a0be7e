fn main() {
    std::process::exit(hyperco_cli::cli_main(std::env::args_os()));
}
