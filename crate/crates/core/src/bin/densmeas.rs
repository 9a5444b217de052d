fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(densmeas::cli::run(&argv));
}
