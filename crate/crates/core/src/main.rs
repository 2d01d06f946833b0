fn main() {
    std::process::exit(uav_planner::cli::run(std::env::args_os()));
}
