use std::process::ExitCode;

fn main() -> ExitCode {
    mapper_stitch_app::cli::main(std::env::args_os())
}
