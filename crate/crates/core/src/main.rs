fn main() -> std::process::ExitCode {
    periodic_reach::cli::main()
}
