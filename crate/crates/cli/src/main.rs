fn main() {
    std::process::exit(gendev_cli::run(std::env::args_os()));
}
