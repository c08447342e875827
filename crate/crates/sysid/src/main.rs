fn main() {
    std::process::exit(manifold_sysid::cli::run(std::env::args_os()));
}
