fn main() {
    std::process::exit(rdsplit::cli::main_with_args(std::env::args_os()));
}
