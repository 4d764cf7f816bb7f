use clap::Parser;
use jsblock::{Cli, CmdError};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("JSBLOCK_LOG")).init();
    let cli = Cli::parse();
    if let Err(err) = jsblock::run(cli) {
        match &err {
            CmdError::Usage(msg) => eprintln!("usage error: {msg}"),
            CmdError::NothingRenamed => eprintln!("nothing renamed"),
            CmdError::Data(e) => eprintln!("error: {e:#}"),
        }
        std::process::exit(err.exit_code());
    }
}
