fn main() {
    std::process::exit(gexp_core::harness::cli_main(std::env::args_os()));
}
