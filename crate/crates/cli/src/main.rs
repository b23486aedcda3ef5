fn main() {
    std::process::exit(mic_cli::run(std::env::args_os()));
}
