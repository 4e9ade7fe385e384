fn main() {
    std::process::exit(ldpm_core::cli::run(std::env::args_os()));
}
