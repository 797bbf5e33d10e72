fn main() {
    std::process::exit(dynsample::cli::run(std::env::args_os()));
}
