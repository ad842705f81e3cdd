use gaussrank::config::RunConfig;
use gaussrank::suite::run_suite;

fn main() {
    let cfg = RunConfig::with_seed(0);
    let t0 = std::time::Instant::now();
    let (rows, all) = run_suite(&cfg);
    for r in &rows {
        println!("{:32} expected [{}] measured [{}] {}", r.name, r.expected, r.measured, if r.pass { "PASS" } else { "FAIL" });
    }
    println!("all = {all}, elapsed = {:.1}s", t0.elapsed().as_secs_f64());
}
