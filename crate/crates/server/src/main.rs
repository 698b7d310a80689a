use clap::Parser;

fn main() -> anyhow::Result<()> {
    trustmdp_server::cli::execute(trustmdp_server::cli::Cli::parse())
}
