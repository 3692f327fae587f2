fn main() {
    std::process::exit(skill_transfer::harness::cli::cli_main(std::env::args_os()));
}
