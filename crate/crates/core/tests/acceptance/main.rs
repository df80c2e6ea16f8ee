//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion outside `KNOWN_SHORTFALLS` fails.

mod criteria;
mod oracle;

use std::time::Instant;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| {
        s.split(',')
            .filter_map(|v| v.trim().parse().ok())
            .collect()
    });
    let mut failed = 0;
    let mut known = Vec::new();
    for (id, name, run) in criteria::ALL {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {} ({secs:.1} s)", v.detail);
        if !v.pass {
            if criteria::KNOWN_SHORTFALLS.contains(id) {
                known.push(id.to_string());
            } else {
                failed += 1;
            }
        }
    }
    if !known.is_empty() {
        println!("documented shortfalls still failing: criterion {}", known.join(", "));
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
