fn main() {
    std::process::exit(ddpc::cli::run(std::env::args_os()));
}
