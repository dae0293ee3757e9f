fn main() {
    std::process::exit(whosai::cli::try_main(std::env::args_os()));
}
