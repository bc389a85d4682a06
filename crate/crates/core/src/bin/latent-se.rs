fn main() {
    std::process::exit(latent_se::cli::main());
}
