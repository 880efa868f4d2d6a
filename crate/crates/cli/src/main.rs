fn main() {
    std::process::exit(dotcavity_cli::main_with_args(std::env::args_os()));
}
