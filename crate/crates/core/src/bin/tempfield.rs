fn main() -> std::process::ExitCode {
    tempfield::cli::main_entry()
}
