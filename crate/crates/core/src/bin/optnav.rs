fn main() {
    std::process::exit(optnav::cli::run_cli(std::env::args_os()));
}
