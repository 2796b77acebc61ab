fn main() {
    std::process::exit(kgsynth::cli::main());
}
