fn main() -> std::process::ExitCode {
    sparktune_service::cli::main()
}
