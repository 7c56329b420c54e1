fn main() {
    std::process::exit(synthstab::cli::main_with(std::env::args_os()));
}
