fn main() {
    std::process::exit(verblab::cli::run_command(std::env::args_os()));
}
