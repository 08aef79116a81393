fn main() {
    std::process::exit(svrobust::cli::run(std::env::args_os()));
}
