fn main() -> std::process::ExitCode {
    tvws::cli::main_with_args(std::env::args_os())
}
