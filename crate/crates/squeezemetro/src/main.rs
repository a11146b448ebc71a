use std::process::ExitCode;

fn main() -> ExitCode {
    squeezemetro::cli::main_entry()
}
