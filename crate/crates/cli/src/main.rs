use std::process::ExitCode;

fn main() -> ExitCode {
    vulntrack::cli::main()
}
