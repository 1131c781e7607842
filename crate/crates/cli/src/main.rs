fn main() {
    std::process::exit(hsp_cli::run_from(std::env::args_os()));
}
