fn main() {
    std::process::exit(pressure_embed::cli::run(std::env::args_os()));
}
