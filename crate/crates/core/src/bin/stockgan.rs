fn main() {
    std::process::exit(stockgan::pipeline::run_cli(std::env::args_os()));
}
