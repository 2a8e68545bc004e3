fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(go_metric_lab_cli::run_command(&argv));
}
