fn main() {
    std::process::exit(redunkit::cli::main(std::env::args_os()));
}
