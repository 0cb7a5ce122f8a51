use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::default().filter_or("MEMEGP_LOG", "warn")).init();
    std::process::exit(memegp::cli::run_from_args(std::env::args_os()));
}
