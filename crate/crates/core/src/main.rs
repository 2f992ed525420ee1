fn main() {
    std::process::exit(kagome_bh::cli::run(std::env::args_os()));
}
