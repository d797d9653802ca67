use kfree_cli::{parse_config, run, CliError};

fn main() {
    env_logger::init();
    let code = match parse_config(std::env::args_os()) {
        Ok(cfg) => run(&cfg),
        Err(CliError::Info(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
