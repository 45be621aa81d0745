fn main() {
    std::process::exit(fbmlab::cli::main_with_args(std::env::args_os()));
}
