fn main() {
    std::process::exit(setfn::cli::run());
}
