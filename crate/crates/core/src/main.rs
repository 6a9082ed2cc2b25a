fn main() {
    std::process::exit(halton_cbc::cli::run(std::env::args_os()));
}
