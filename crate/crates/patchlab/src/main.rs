fn main() {
    std::process::exit(patchlab::cli::main_with(std::env::args_os()));
}
