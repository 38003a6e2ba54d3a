use clap::error::ErrorKind;
use clap::Parser;

use blpv::cli::{self, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BLPV_LOG", "warn")).init();
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let obj = serde_json::json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{obj}");
            std::process::exit(2);
        }
    };
    if let Err(err) = cli::run(args) {
        eprintln!("{}", cli::error_object(&err));
        std::process::exit(1);
    }
}
