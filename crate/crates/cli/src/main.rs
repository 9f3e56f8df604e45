use std::process::ExitCode;

use clap::Parser;
use gwb::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        #[cfg(feature = "parallel")]
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
        #[cfg(not(feature = "parallel"))]
        eprintln!("warning: built without the parallel feature, ignoring --threads {t}");
    }
    match gwb::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: a solver stopped before converging; results were written");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(gwb::exit_code(&e))
        }
    }
}
