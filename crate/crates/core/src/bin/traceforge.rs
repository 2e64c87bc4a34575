fn main() -> std::process::ExitCode {
    traceforge::cli::main()
}
