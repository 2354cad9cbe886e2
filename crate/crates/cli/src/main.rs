use clap::Parser;

use pmx_cli::{execute, Cli, Format};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Text => {
                    if !report.text.is_empty() {
                        print!("{}", report.text);
                        if !report.text.ends_with('\n') {
                            println!();
                        }
                    }
                }
                Format::Json if !report.json.is_null() => println!("{}", report.json),
                Format::Json => {}
            }
            std::process::exit(if report.ok { 0 } else { 1 });
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
