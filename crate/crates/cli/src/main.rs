fn main() {
    std::process::exit(domain_lab_cli::run(std::env::args_os()));
}
