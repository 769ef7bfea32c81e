fn main() -> std::process::ExitCode {
    neca_cli::run(std::env::args_os())
}
