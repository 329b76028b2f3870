fn main() {
    std::process::exit(mot_sort::cli::main(std::env::args_os()));
}
