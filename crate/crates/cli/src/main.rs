fn main() {
    std::process::exit(sea_cli::run(std::env::args_os()));
}
