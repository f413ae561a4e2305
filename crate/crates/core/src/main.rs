fn main() {
    std::process::exit(pelastic::app::cli_main(std::env::args_os()));
}
