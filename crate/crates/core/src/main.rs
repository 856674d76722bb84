fn main() {
    std::process::exit(crcalc::cli::run(std::env::args_os()));
}
