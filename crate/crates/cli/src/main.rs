fn main() {
    std::process::exit(taskseq_cli::run_command(std::env::args_os()));
}
