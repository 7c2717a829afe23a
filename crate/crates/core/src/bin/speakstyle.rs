fn main() {
    std::process::exit(speakstyle::cli::run(std::env::args_os()));
}
