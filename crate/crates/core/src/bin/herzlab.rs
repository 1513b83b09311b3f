fn main() -> std::process::ExitCode {
    herzlab::cli::main()
}
