fn main() {
    std::process::exit(fbmshe_cli::run_command(std::env::args_os()));
}
