fn main() {
    std::process::exit(mvmf_cli::cli::main_with(std::env::args_os()));
}
