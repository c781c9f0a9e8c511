fn main() {
    std::process::exit(tomo_noise::cli::main_with_args(std::env::args_os()));
}
