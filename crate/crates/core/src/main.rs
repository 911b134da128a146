fn main() {
    std::process::exit(poisson_md::cli::main_with_args(std::env::args_os()));
}
