fn main() {
    std::process::exit(deepcent::cli::run(std::env::args_os()));
}
