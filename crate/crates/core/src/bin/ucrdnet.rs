fn main() {
    std::process::exit(ucrdnet::cli::run(std::env::args_os()));
}
