fn main() {
    std::process::exit(kbilmdm::cli::main_with_args(std::env::args_os()));
}
