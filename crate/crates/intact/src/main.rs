use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();
    if let Err(e) = intact::cli::run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
