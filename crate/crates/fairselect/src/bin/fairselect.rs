fn main() {
    std::process::exit(fairselect::cli::cli_main(std::env::args_os()));
}
