fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(geolab::cli::run(std::env::args_os()))
}
