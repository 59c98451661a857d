fn main() {
    std::process::exit(actsql::cli::run(std::env::args_os()));
}
