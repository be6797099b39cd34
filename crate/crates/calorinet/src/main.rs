fn main() {
    std::process::exit(calorinet::cli::run());
}
