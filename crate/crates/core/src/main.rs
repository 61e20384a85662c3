use clap::Parser;

use credell::cli::{run, CliInvocation};

fn main() {
    // default SIGPIPE disposition so piping into `head` exits quietly
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let invocation = CliInvocation::parse();
    std::process::exit(run(&invocation));
}
