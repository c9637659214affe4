fn main() {
    std::process::exit(petct_datakit::cli::run(std::env::args_os()));
}
