fn main() {
    std::process::exit(ksym::cli::main_with_args(std::env::args_os()));
}
