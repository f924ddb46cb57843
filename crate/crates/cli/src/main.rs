fn main() {
    std::process::exit(had_doa_cli::run(std::env::args_os()));
}
