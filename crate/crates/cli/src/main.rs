fn main() {
    std::process::exit(concept_realm_cli::run(std::env::args_os()));
}
