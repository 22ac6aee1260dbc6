fn main() {
    std::process::exit(ngspot::cli::run(std::env::args_os()));
}
