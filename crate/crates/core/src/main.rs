fn main() {
    std::process::exit(sampling_rd::cli::run_command(std::env::args_os()));
}
