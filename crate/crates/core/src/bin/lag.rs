fn main() {
    std::process::exit(latent_log::cli::run(std::env::args_os()));
}
