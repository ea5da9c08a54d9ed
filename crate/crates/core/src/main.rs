fn main() {
    std::process::exit(eye_affect::cli::main_with_args(std::env::args_os()));
}
