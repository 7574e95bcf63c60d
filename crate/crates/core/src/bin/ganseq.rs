fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GANSEQ_LOG", "info")).format_timestamp(None).init();
    std::process::exit(ganseq::cli::dispatch(std::env::args_os()));
}
