//! Harness process backed by the embedded interpreter. Reads one request per
//! line on stdin and writes one response per line on stdout.

use std::io::{BufRead, Write};

use ahd_core::runtime::handle_line;

const DEFAULT_STEP_LIMIT: u64 = u64::MAX;

fn main() {
    let mut step_limit = DEFAULT_STEP_LIMIT;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--step-limit" => match args.next().and_then(|v| v.parse().ok()) {
                Some(v) => step_limit = v,
                None => {
                    eprintln!("ahd-guest: --step-limit needs a positive integer");
                    std::process::exit(2);
                }
            },
            other => {
                eprintln!("ahd-guest: unknown argument {other}");
                std::process::exit(2);
            }
        }
    }
    // Deeply recursive candidates need more than the default main stack.
    let worker = std::thread::Builder::new()
        .name("guest".into())
        .stack_size(64 << 20)
        .spawn(move || serve(step_limit))
        .expect("spawn guest thread");
    if worker.join().is_err() {
        std::process::exit(2);
    }
}

fn serve(step_limit: u64) {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut input = stdin.lock();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match input.read_until(b'\n', &mut buf) {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        let line = String::from_utf8_lossy(&buf);
        let resp = handle_line(line.trim_end_matches(['\n', '\r']), step_limit);
        if writeln!(out, "{}", resp.to_line()).and_then(|_| out.flush()).is_err() {
            break;
        }
    }
}
