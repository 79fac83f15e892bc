fn main() {
    std::process::exit(pxlap::cli::main_with_args(std::env::args_os()));
}
