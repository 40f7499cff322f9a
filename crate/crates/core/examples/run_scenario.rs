//! Drives the command-line front end on a bundled scenario file:
//! `cargo run --example run_scenario -- scenarios/becker_doring_mass.toml`.

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/constant_kernel.toml").to_string());
    let out = std::env::temp_dir().join("coagfrag_example");
    let out = out.to_string_lossy();
    for cmd in ["verify", "simulate"] {
        let code = coagfrag::cli::run(["coagfrag", cmd, "--config", &path, "--out", &out]);
        println!("{cmd}: exit {code}");
    }
    let csv = format!("{out}.csv");
    if std::path::Path::new(&csv).exists() {
        let code = coagfrag::cli::run(["coagfrag", "audit", "--config", &path, "--trajectory", &csv]);
        println!("audit: exit {code}");
    }
}
