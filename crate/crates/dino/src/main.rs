fn main() -> std::process::ExitCode {
    dino::cli::main()
}
