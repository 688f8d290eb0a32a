fn main() {
    std::process::exit(hullconc_cli::run(std::env::args_os()));
}
