fn main() {
    std::process::exit(augmented_hessian::cli::run(std::env::args_os()));
}
