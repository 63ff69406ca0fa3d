fn main() {
    std::process::exit(ksdg::cli::main_with_args(std::env::args_os()));
}
